import functools

import pytest

from stratcheck.gallery import scene_path
from stratcheck.scene import load_scene


@functools.lru_cache(maxsize=None)
def _load(name):
    return load_scene(scene_path(name))


@pytest.fixture
def shipped():
    """Loader for the scenes that ship with the package."""
    return _load


_criteria: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    n = getattr(report, "criterion", None)
    if n is not None:
        _criteria[n] = (report.outcome, report.nodeid)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    import test_acceptance as acc

    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        outcome, _ = _criteria[n]
        state = "PASS" if outcome == "passed" else "FAIL"
        detail = acc.DETAILS.get(n, "") if outcome == "passed" else "see failure above"
        terminalreporter.write_line(f"criterion {n} {state}  {acc.TITLES[n]}: {detail}")
