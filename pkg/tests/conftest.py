import pytest

from herdgibbs.pgm import make_two_var_model

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def two_var():
    return make_two_var_model(0.1)


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
