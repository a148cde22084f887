import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_CRITERIA = []


@pytest.fixture
def criterion():
    """``report(number, name, ok, detail)`` records one acceptance line."""
    def report(number, name, ok, detail=""):
        _CRITERIA.append((number, name, bool(ok), detail))
        return bool(ok)
    return report


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok, detail in sorted(_CRITERIA, key=lambda c: str(c[0])):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number} {name}: {detail}")
