"""Shared fixtures and the per-criterion acceptance summary.

Tests marked ``@pytest.mark.acceptance(k, "title")`` are grouped by k; the
terminal summary prints one PASS/FAIL line per criterion together with any
``detail`` recorded through ``record_property``.
"""

import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(k, title): acceptance criterion k")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    k, title = mark.args
    entry = _RESULTS.setdefault(k, {"title": title, "passed": True, "details": []})
    entry["passed"] &= rep.passed
    entry["details"].extend(str(v) for name, v in item.user_properties if name == "detail")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_RESULTS):
        e = _RESULTS[k]
        status = "PASS" if e["passed"] else "FAIL"
        detail = "; ".join(e["details"])
        terminalreporter.write_line(f"criterion {k} [{status}] {e['title']}" + (f" -- {detail}" if detail else ""))
