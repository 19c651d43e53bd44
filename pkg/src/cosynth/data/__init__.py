"""Bundled instances."""

import json
from importlib import resources

__all__ = ["example_document", "example_instance", "EXAMPLE_NAME"]

EXAMPLE_NAME = "ntu_example.json"


def example_document() -> dict:
    """The campus vehicle instance as a JSON document."""
    return json.loads(resources.files(__name__).joinpath(EXAMPLE_NAME).read_text())


def example_instance():
    from ..problem import load_instance

    return load_instance(example_document())
