import sys

import numpy as np
import pytest


def random_subintensity(rng, p, exit_low=0.1):
    """Dense sub-intensity matrix with every state able to exit."""
    T = rng.uniform(0.0, 1.0, size=(p, p))
    np.fill_diagonal(T, 0.0)
    exits = rng.uniform(exit_low, 1.0, size=p)
    np.fill_diagonal(T, -(T.sum(axis=1) + exits))
    return T


def random_pi(rng, p):
    return rng.dirichlet(np.ones(p))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
