"""Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""

import pytest

_LINES = []


@pytest.fixture
def report(request):
    """Call ``report(detail)`` before asserting; the line survives a failure."""
    def record(detail):
        request.node.user_properties.append(("criterion_detail", detail))
    return record


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    details = [v for k, v in report.user_properties if k == "criterion_detail"]
    if "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1].replace("test_", "", 1)
    status = "PASS" if report.passed else "FAIL"
    line = f"{status}  {name}: {'; '.join(details) or report.outcome}"
    _LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
