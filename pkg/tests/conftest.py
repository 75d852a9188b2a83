import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fggc.core import MeshSpec

settings.register_profile(
    "fggc",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("fggc")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion a test belongs to")


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def mesh1():
    return MeshSpec.recommended(2.0**-6, 1)


@pytest.fixture
def mesh2():
    """Small 2D mesh: eps = 2^-4 on [-1, 1]^2."""
    return MeshSpec.recommended(2.0**-4, 2, domain=(-1.0, 1.0))


# per-criterion outcome of the acceptance suite -------------------------------------

_CRITERIA: dict[int, dict] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark:
            n, title = mark.args
            _CRITERIA.setdefault(n, {"title": title, "outcomes": []})


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if not mark:
        return
    entry = _CRITERIA[mark.args[0]]
    if hasattr(rep, "wasxfail"):
        # expected failures and unexpected passes both mean the criterion is not met as stated
        entry["outcomes"].append(("FAIL", item.name))
    elif rep.failed:
        entry["outcomes"].append(("FAIL", item.name))
    elif rep.when == "call" and rep.passed:
        entry["outcomes"].append(("PASS", item.name))
    elif rep.skipped:
        entry["outcomes"].append(("SKIP", item.name))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        entry = _CRITERIA[n]
        status = [s for s, _ in entry["outcomes"]]
        if not status:
            verdict = "NOT RUN"
        elif "FAIL" in status:
            verdict = "FAIL"
        elif "SKIP" in status:
            verdict = "SKIP"
        else:
            verdict = "PASS"
        failed = [name for s, name in entry["outcomes"] if s == "FAIL"]
        detail = f"  ({', '.join(failed)})" if failed else ""
        terminalreporter.write_line(f"criterion {n:2d} {verdict:7s} {entry['title']}{detail}")
