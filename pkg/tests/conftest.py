import pytest

from kantorovich.expr import Field

EX1 = "(1+x)*y/(1+x^2)"
EX2 = "sin(x)*cos(y)"

# filled by test_acceptance; echoed after the run so the lines survive capture
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def ex1():
    return Field(EX1, 1, 4)


@pytest.fixture(scope="session")
def ex2():
    return Field(EX2, 1, 4)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
