import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from divrate.grid import Grid

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def unit_grid():
    return Grid.from_intervals(4.0, 4)


_ACCEPTANCE_LINES: list = []


@pytest.fixture(scope="session")
def report():
    """Record one status line per acceptance criterion; echoed in the terminal summary."""

    def emit(line: str) -> None:
        _ACCEPTANCE_LINES.append(line)
        print(line)

    return emit


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
