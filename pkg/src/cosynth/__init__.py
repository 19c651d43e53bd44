"""Co-synthesis of a dynamic sensor mask, an edit function and a supervisor
that keep a discrete-event plant's secret opaque to an eavesdropping
intruder without revealing the defense."""

__version__ = "0.1.0"
