"""Collects acceptance-criterion outcomes and prints one status line per criterion."""

from collections import defaultdict

import pytest

CRITERIA = {
    1: "decoder equals exhaustive oracle",
    2: "normalization and prefix mass",
    3: "mini-corpus tables exact",
    4: "log/probability consistency",
    5: "closed-test reproduction",
    6: "cross-validation reproduction",
    7: "lambda sweep shape",
    8: "CLI determinism",
}

_outcomes = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion the test checks")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        reason = ""
        if report.skipped and isinstance(report.longrepr, tuple):
            reason = report.longrepr[2].removeprefix("Skipped: ")
        _outcomes[marker.args[0]].append((item.name, report.outcome, reason))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n, title in CRITERIA.items():
        results = _outcomes.get(n)
        if not results:
            tr.write_line(f"C{n} {title}: NOT RUN")
            continue
        outcomes = [o for _, o, _ in results]
        if "failed" in outcomes:
            failed = ", ".join(name for name, o, _ in results if o == "failed")
            tr.write_line(f"C{n} {title}: FAIL ({failed})")
        elif "skipped" in outcomes:
            reasons = "; ".join(r for _, o, r in results if o == "skipped")
            passed = sum(o == "passed" for o in outcomes)
            tr.write_line(f"C{n} {title}: SKIP ({reasons}; {passed} check(s) passed)")
        else:
            tr.write_line(f"C{n} {title}: PASS ({len(results)} check(s))")
