from __future__ import annotations

import time

import numpy as np
import pytest

from problems import SEED

_STARTED = time.perf_counter()
_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number n")


def pytest_collection_modifyitems(session, config, items):
    # the wall-clock criterion has to observe every other test, so it runs last
    last = [it for it in items if (m := it.get_closest_marker("criterion")) and m.args[0] == 10]
    items[:] = [it for it in items if it not in last] + last
    config.stash[_COUNT] = len(items)


_COUNT = pytest.StashKey[int]()


@pytest.fixture
def elapsed_session(request):
    """Seconds since the session started and the number of collected tests."""
    return lambda: (time.perf_counter() - _STARTED, request.config.stash.get(_COUNT, 0))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" and not report.failed:
        return
    detail = dict(item.user_properties).get("detail", "")
    if report.failed and not detail:
        detail = str(call.excinfo.value).splitlines()[0] if call.excinfo else "error"
    _CRITERIA[marker.args[0]] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)
