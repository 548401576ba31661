import numpy as np
import pytest

from localtime_lab.paths import SimulationConfig, TimeGrid


@pytest.fixture
def small_config():
    return SimulationConfig(seed=7, replicates=64, grid=TimeGrid(1.0, 2 ** 10))


def brute_prefix_max(v):
    return np.array([max(v[: i + 1]) for i in range(len(v))])


def brute_prefix_min(v):
    return np.array([min(v[: i + 1]) for i in range(len(v))])


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import CRITERIA, VERDICTS
    except ImportError:
        return
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in CRITERIA:
        terminalreporter.write_line(VERDICTS.get(name, f"[SKIP] criterion {name}: not run"))
