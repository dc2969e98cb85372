import functools

import pytest

from h2grid.engine import run
from h2grid.params import MicrogridParams
from h2grid.scenario import builtin


@functools.lru_cache(maxsize=None)
def case_trace(name):
    return tuple(run(builtin(name)))


@pytest.fixture(scope="session")
def params():
    return MicrogridParams()


@pytest.fixture(scope="session")
def params60():
    return MicrogridParams().with_overrides({"electrolyzer": {"capacity_ratio": 0.6}})


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
