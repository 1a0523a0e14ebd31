import os

import pytest
from hypothesis import HealthCheck, settings

from gwasym import working_precision
from gwasym.flow import init_state, integrate_to_event
from gwasym.invariants import build_tables
from gwasym.singularity import analyze

settings.register_profile(
    "default", max_examples=100, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def tables():
    """Genus-0/1 tables: exact to 200, 256-bit to 5000."""
    return build_tables(200, 5000, 256)


@pytest.fixture(scope="session")
def g0(tables):
    return tables[0]


@pytest.fixture(scope="session")
def g1(tables):
    return tables[1]


@pytest.fixture(scope="session")
def event(g0):
    return integrate_to_event(init_state(-30, g0), local_order=24)


@pytest.fixture(scope="session")
def report(g0, event):
    return analyze(g0, event=event)


@pytest.fixture
def prec256():
    with working_precision(256):
        yield
