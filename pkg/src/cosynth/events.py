"""Decorated event symbols.

Every automaton in the package runs over events drawn from one decorated
alphabet: plain plant events, their ``+on``/``+off``/``#`` copies, sensor
toggles, control commands, ``stop`` and ``decode``.  Events are interned so
that equal events are usually the same object; equality and ordering go
through the canonical string.
"""

from __future__ import annotations

import re
from enum import Enum

__all__ = [
    "Kind",
    "Event",
    "plain",
    "on",
    "off",
    "sharp",
    "sensor_on",
    "sensor_off",
    "command",
    "STOP",
    "DECODE",
    "parse_event",
]


class Kind(Enum):
    PLAIN = "plain"
    ON = "on"
    OFF = "off"
    SHARP = "sharp"
    SENSOR_ON = "sensor_on"
    SENSOR_OFF = "sensor_off"
    COMMAND = "command"
    STOP = "stop"
    DECODE = "decode"


_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_CACHE: dict[tuple, "Event"] = {}


class Event:
    """A single symbol of the decorated alphabet.

    ``name`` is the base event for plain/on/off/sharp, the sensor id for
    toggles and a sorted tuple of base events for commands.
    """

    __slots__ = ("kind", "name", "key", "_hash")

    def __new__(cls, kind: Kind, name=None):
        if kind is Kind.COMMAND:
            name = tuple(sorted(set(name)))
            if not name:
                raise ValueError("a control command must enable at least one event")
        ident = (kind, name)
        ev = _CACHE.get(ident)
        if ev is not None:
            return ev
        ev = object.__new__(cls)
        ev.kind = kind
        ev.name = name
        ev.key = _canonical(kind, name)
        ev._hash = hash(ev.key)
        _CACHE[ident] = ev
        return ev

    def __getnewargs__(self):
        return (self.kind, self.name)

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if isinstance(other, Event):
            return self.key == other.key
        return NotImplemented

    def __lt__(self, other):
        return self.key < other.key

    def __str__(self):
        return self.key

    def __repr__(self):
        return f"Event({self.key!r})"

    @property
    def base(self):
        """Base plant event for plain/on/off/sharp events, else None."""
        if self.kind in (Kind.PLAIN, Kind.ON, Kind.OFF, Kind.SHARP):
            return self.name
        return None

    @property
    def members(self) -> frozenset:
        if self.kind is not Kind.COMMAND:
            raise TypeError(f"{self} is not a control command")
        return frozenset(self.name)


def _canonical(kind: Kind, name) -> str:
    if kind is Kind.PLAIN:
        return str(name)
    if kind is Kind.ON:
        return f"{name}+on"
    if kind is Kind.OFF:
        return f"{name}+off"
    if kind is Kind.SHARP:
        return f"{name}#"
    if kind is Kind.SENSOR_ON:
        return f"s{name}+on"
    if kind is Kind.SENSOR_OFF:
        return f"s{name}+off"
    if kind is Kind.COMMAND:
        return "cmd{" + ",".join(name) + "}"
    if kind is Kind.STOP:
        return "stop"
    return "decode"


def plain(name: str) -> Event:
    if not _NAME_RE.match(name) or name in ("stop", "decode"):
        raise ValueError(f"invalid base event name {name!r}")
    return Event(Kind.PLAIN, name)


def on(name: str) -> Event:
    return Event(Kind.ON, name)


def off(name: str) -> Event:
    return Event(Kind.OFF, name)


def sharp(name: str) -> Event:
    return Event(Kind.SHARP, name)


def sensor_on(sensor) -> Event:
    return Event(Kind.SENSOR_ON, str(sensor))


def sensor_off(sensor) -> Event:
    return Event(Kind.SENSOR_OFF, str(sensor))


def command(members) -> Event:
    return Event(Kind.COMMAND, members)


STOP = Event(Kind.STOP)
DECODE = Event(Kind.DECODE)

_CMD_RE = re.compile(r"^cmd\{([^}]*)\}$")
_SENSOR_RE = re.compile(r"^s(\d+)\+(on|off)$")


def parse_event(text: str) -> Event:
    """Inverse of ``str(event)``.

    ``s3+on`` is read as a sensor toggle; instance validation rejects
    maskable base events named ``s<digits>`` for that reason.
    """
    text = text.strip()
    if text == "stop":
        return STOP
    if text == "decode":
        return DECODE
    m = _CMD_RE.match(text)
    if m:
        members = [p.strip() for p in m.group(1).split(",") if p.strip()]
        return command(members)
    m = _SENSOR_RE.match(text)
    if m:
        return sensor_on(m.group(1)) if m.group(2) == "on" else sensor_off(m.group(1))
    if text.endswith("+on"):
        return on(text[:-3])
    if text.endswith("+off"):
        return off(text[:-4])
    if text.endswith("#"):
        return sharp(text[:-1])
    return plain(text)
