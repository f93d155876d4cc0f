import pytest

from ifspec.refsuts import alarm_model, terminal_model, truck_model
from oracles import ACCEPTANCE, all_illegal_model, line_model, self_loop_model


@pytest.fixture
def alarm():
    return alarm_model()


@pytest.fixture(scope="session")
def terminal():
    return terminal_model()


@pytest.fixture(scope="session")
def truck():
    return truck_model()


@pytest.fixture
def line():
    return line_model()


@pytest.fixture
def self_loop():
    return self_loop_model()


@pytest.fixture
def all_illegal():
    return all_illegal_model()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])

