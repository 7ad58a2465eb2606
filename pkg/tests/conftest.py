import pytest

from rbtensor.atomic_data import load_scheme

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def d1():
    return load_scheme("D1")


@pytest.fixture(scope="session")
def d2():
    return load_scheme("D2")


@pytest.fixture(autouse=True)
def _no_data_override(monkeypatch):
    monkeypatch.delenv("RBTENSOR_DATA", raising=False)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
