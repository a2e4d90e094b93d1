"""Acceptance reporting: tests marked ``criterion(n, title)`` get one PASS/FAIL line each."""
import pytest

_OUTCOMES: dict[int, tuple[str, str, float]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        status = "PASS" if report.passed else "FAIL"
        prev = _OUTCOMES.get(number)
        if prev is None or prev[0] == "PASS":
            _OUTCOMES[number] = (status, title, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_OUTCOMES):
        status, title, duration = _OUTCOMES[number]
        terminalreporter.write_line(f"{status} criterion {number}: {title} ({duration:.2f}s)")
