from pathlib import Path

import pytest

CONTROLS = Path(__file__).resolve().parent.parent / "controls"

ADJACENT_REFERENCE = (CONTROLS / "adjacent_reference.ctl").read_text()
HALVING_REFERENCE = (CONTROLS / "halving_reference.ctl").read_text()

# lines printed at the end of the run by the acceptance module
ACCEPTANCE_LINES = []


@pytest.fixture
def adjacent_text():
    return ADJACENT_REFERENCE


@pytest.fixture
def halving_text():
    return HALVING_REFERENCE


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
