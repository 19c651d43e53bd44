import os

import pytest
from hypothesis import HealthCheck, settings

from cosynth.components import build_components
from cosynth.data import example_instance
from cosynth.pipeline import run_procedure

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", parent=settings.get_profile("default"), max_examples=500)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def example():
    return example_instance()


@pytest.fixture(scope="session")
def example_components(example):
    return build_components(example)


@pytest.fixture(scope="session")
def example_result(example):
    """One full run on the bundled instance, shared by every test."""
    return run_procedure(example)
