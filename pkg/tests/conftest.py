import re

_CRITERIA: dict[int, dict] = {}
_NAME = re.compile(r"test_criterion_(\d+)")


def pytest_runtest_logreport(report):
    m = _NAME.search(report.nodeid)
    if not m:
        return
    if report.when != "call" and report.outcome == "passed":
        return
    entry = _CRITERIA.setdefault(int(m.group(1)), {"ok": True, "details": []})
    entry["ok"] &= report.outcome == "passed"
    entry["details"].extend(f"{k}={v}" for k, v in report.user_properties)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        entry = _CRITERIA[num]
        verdict = "PASS" if entry["ok"] else "FAIL"
        detail = "; ".join(dict.fromkeys(entry["details"]))
        terminalreporter.write_line(f"criterion {num:2d}: {verdict}  {detail}")
