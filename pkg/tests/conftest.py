import sys

import numpy as np
import pytest

from abdeform import solutions
from abdeform.numerics import Grid


@pytest.fixture(scope="session")
def grid():
    return Grid.default()


@pytest.fixture(scope="session")
def small_grid():
    return Grid.parse("10,5,401,201")


@pytest.fixture(scope="session")
def soliton(grid):
    return solutions.one_soliton(1.5, 0.0, grid)


@pytest.fixture(scope="session")
def two_sol(grid):
    return solutions.two_soliton(1.1, 1.0, 0.0, 0.0, grid)


@pytest.fixture
def rng():
    return np.random.default_rng(20240521)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    got = getattr(mod, "LINES", None)
    if got:
        terminalreporter.section("acceptance criteria")
        for line in got:
            terminalreporter.write_line(line)
