"""Acceptance bookkeeping: one summary line per criterion after the run."""

import pytest

_OUTCOMES = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    failed = report.failed
    if report.when == "call" or failed:
        detail = dict(item.user_properties).get("detail", "")
        _OUTCOMES[number] = (title, not failed and report.when == "call", detail)


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_OUTCOMES):
        title, ok, detail = _OUTCOMES[number]
        line = f"criterion {number:>2} [{'PASS' if ok else 'FAIL'}] {title}"
        if detail:
            line += f": {detail}"
        terminalreporter.write_line(line)
