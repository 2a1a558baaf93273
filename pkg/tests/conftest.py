import numpy as np
import pytest

from coordmed.analysis import AUDIT

# The minisum-bound criterion inspects every ratio computed by the suite, so it
# must run after everything else.
LAST = "test_criterion_03_minisum_bound"


def pytest_collection_modifyitems(session, config, items):
    last = [it for it in items if it.name == LAST]
    rest = [it for it in items if it.name != LAST]
    items[:] = rest + last


def pytest_sessionstart(session):
    AUDIT.reset()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_profile(rng, n, scale=1.0):
    return rng.uniform(-scale, scale, size=(n, 2))


CRITERIA = {}


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion."""

    def report(number, ok, detail=""):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        CRITERIA[number] = line
        print(line, flush=True)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[number])
