import re
from collections import defaultdict

CRITERION = re.compile(r"test_criterion_(\d+)")
_outcomes: dict[int, list[bool]] = defaultdict(list)


def pytest_runtest_logreport(report):
    m = CRITERION.search(report.nodeid)
    if not m:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _outcomes[int(m.group(1))].append(report.outcome == "passed")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        results = _outcomes[n]
        verdict = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d}: {verdict} ({sum(results)}/{len(results)} checks)")
