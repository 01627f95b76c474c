"""Per-criterion pass/fail summary for the acceptance module."""
import re
from collections import defaultdict

_CRITERION = re.compile(r"test_criterion_(\d+)")
_outcomes = defaultdict(list)


def pytest_runtest_logreport(report):
    match = _CRITERION.search(report.nodeid)
    if not match:
        return
    if report.when == "call" or report.outcome != "passed":
        details = [f"{value}" for name, value in report.user_properties if name == "detail"]
        _outcomes[int(match.group(1))].append((report.nodeid, report.outcome, details))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_outcomes):
        runs = _outcomes[number]
        ok = all(outcome == "passed" for _, outcome, _ in runs)
        details = "; ".join(d for _, _, ds in runs for d in ds)
        tr.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}" + (f"  ({details})" if details else ""))
