"""Collects acceptance verdicts and prints one line per criterion at the end of the run."""

ACCEPTANCE_RESULTS = {}


def record(criterion: int, title: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE_RESULTS[criterion] = (title, passed, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        title, passed, detail = ACCEPTANCE_RESULTS[n]
        verdict = "PASS" if passed else "FAIL"
        line = f"criterion {n}: {verdict}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
