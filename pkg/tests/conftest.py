import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
