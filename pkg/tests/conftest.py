import re

import pytest

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")
_outcomes = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    match = _CRITERION.search(item.nodeid)
    if not match:
        return
    number = int(match.group(1))
    failed = report.failed or (report.when == "call" and report.skipped)
    if failed or number not in _outcomes:
        _outcomes[number] = "FAIL" if failed else _outcomes.get(number, "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        terminalreporter.write_line(f"criterion {number:2d}: {_outcomes[number]}")
