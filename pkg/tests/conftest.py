import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ghzcs.circuit import perfect_binary_tree  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture
def perfect15():
    """The 15-node, 4-level perfect binary tree (heap order)."""
    return perfect_binary_tree(4)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
