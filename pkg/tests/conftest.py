import re

_criteria: dict[str, str] = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_criterion_(\d+)_", report.nodeid)
    if not m:
        return
    key = m.group(1)
    if report.failed:
        _criteria[key] = "FAIL"
    elif report.when == "call" and key not in _criteria:
        _criteria[key] = "PASS" if report.passed else "SKIP"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_criteria):
        terminalreporter.write_line(f"criterion {int(key)}: {_criteria[key]}")
