import re

_CRITERIA = {}
_PATTERN = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")


def pytest_runtest_logreport(report):
    m = _PATTERN.search(report.nodeid)
    if not m or (report.when != "call" and not report.failed):
        return
    n = int(m.group(1))
    ok = _CRITERIA.get(n, True) and not report.failed
    _CRITERIA[n] = ok


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(_CRITERIA):
        terminalreporter.write_line(f"criterion {n}: {'PASS' if _CRITERIA[n] else 'FAIL'}")
