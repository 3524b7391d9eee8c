import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_criteria = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::" not in report.nodeid:
        return
    name = report.nodeid.split("::", 1)[1]
    if report.when == "call" or report.outcome != "passed":
        _criteria.setdefault(name, report.outcome)
        if report.outcome != "passed":
            _criteria[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_criteria):
        verdict = "PASS" if _criteria[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict}  {name}")
