import numpy as np
import pytest

from ziplpcm import WeightedNetwork

ACCEPTANCE_LINES = []


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running statistical or end-to-end test")
    config.addinivalue_line("markers", "acceptance: acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def report():
    """``report(label, ok, detail)`` records one pass/fail line and returns ``ok``."""
    def _report(label, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return _report


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_net(rng):
    n = 8
    y = rng.poisson(1.5, size=(n, n))
    np.fill_diagonal(y, 0)
    return WeightedNetwork(y, directed=True)
