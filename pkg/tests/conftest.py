"""Collects outcomes of ``@pytest.mark.acceptance(number, title)`` tests and
prints one PASS/FAIL line per criterion at the end of the run."""

import pytest

_outcomes = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    state = _outcomes.setdefault(number, {"title": title, "passed": True, "ran": False})
    if report.failed:
        state["passed"] = False
    if report.when == "call":
        state["ran"] = state["ran"] or not report.skipped


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        state = _outcomes[number]
        verdict = "PASS" if state["passed"] and state["ran"] else "FAIL"
        terminalreporter.write_line(f"[acceptance {number:>2}] {verdict}  {state['title']}")
