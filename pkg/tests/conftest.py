import numpy as np
import pytest

from tdsmor import DelaySystem, InitialData, gen_random_stable

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def scalar_delay():
    """x(t+1) = 0.5 x(t) + 0.1 x(t-1) + u(t), y = x."""
    return DelaySystem(A0=[[0.5]], delayed=[([[0.1]], 1)], B=[[1.0]], C=[[1.0]])


@pytest.fixture
def small_system():
    return gen_random_stable(10, (1, 3), seed=11, margin=0.1, m=2, p=2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
