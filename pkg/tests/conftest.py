import pytest
from hypothesis import settings

from ghost_scaler import models

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

_ACCEPTANCE = []


@pytest.fixture(scope="session")
def hill():
    return models.hill()


@pytest.fixture(scope="session")
def auto():
    return models.autocatalytic()


@pytest.fixture(scope="session")
def report():
    """Record one pass/fail line per acceptance criterion."""

    def add(number, title, ok, detail):
        line = "[%s] criterion %2d: %s | %s" % ("PASS" if ok else "FAIL", number, title, detail)
        _ACCEPTANCE.append((number, line))
        print(line)
        return ok

    return add


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE):
        terminalreporter.write_line(line)
