import pytest

from drivefit.model import SimConfig

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES = {}


@pytest.fixture
def sim():
    return SimConfig()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
