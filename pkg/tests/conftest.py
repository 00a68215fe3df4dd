import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: minutes-scale solves")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def criterion():
    """Record the verdict of an acceptance criterion; the summary prints one line each."""

    def record(number, title, ok, detail):
        _CRITERIA[number] = (title, bool(ok), detail)
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}: {detail}"
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok, detail = _CRITERIA[number]
        terminalreporter.write_line(
            f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}: {detail}")
