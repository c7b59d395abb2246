import os

import pytest
from hypothesis import settings

from tlsnoise import units
from tlsnoise.ensemble import EnsembleSpec
from tlsnoise.physcore import BathSpec

settings.register_profile("default", max_examples=40, deadline=None)
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def bath():
    return BathSpec.from_lab()


@pytest.fixture(scope="session")
def box1():
    return EnsembleSpec.from_lab(alpha=1)


@pytest.fixture(scope="session")
def box0():
    return EnsembleSpec.from_lab(alpha=0)


@pytest.fixture(scope="session")
def omega_q():
    return units.ghz_to_radns(5.7)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
