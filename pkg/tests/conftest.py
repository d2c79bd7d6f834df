import numpy as np
import pytest

from liespoof.lie_core import SE2

_RESULTS: dict = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    ok = call.excinfo is None
    prev = _RESULTS.get(number, (title, True, []))
    _RESULTS[number] = (prev[0], prev[1] and ok, prev[2] + [item.name])


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, ok, names = _RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}  ({len(names)} tests)")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_pose(rng, span=20.0):
    x, y = rng.uniform(-span, span, 2)
    return SE2.from_pose(x, y, rng.uniform(-np.pi, np.pi))
