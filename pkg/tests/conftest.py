import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from jointmpc.channel import LinkBudget  # noqa: E402
from jointmpc.dynamics import DynamicsParams  # noqa: E402
from jointmpc.surrogate import SmoothingConfig  # noqa: E402


@pytest.fixture
def budget():
    return LinkBudget()


@pytest.fixture
def params():
    return DynamicsParams()


@pytest.fixture
def smoothing():
    return SmoothingConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
