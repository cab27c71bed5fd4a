import numpy as np
import pytest

from halfkdv.grid_ops import build_grid

# lines collected by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES = []


def xgauss(x, a=1.0, s=1.5, x0=4.0):
    u = a * x * np.exp(-((x - x0) / s) ** 2)
    u[0] = 0.0
    return u


@pytest.fixture
def small_grid():
    return build_grid(40.0, 513)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
