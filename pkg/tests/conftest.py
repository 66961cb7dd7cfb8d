"""Shared pytest plumbing: per-criterion pass/fail summary lines."""

CRITERION_RESULTS = []


def record_criterion(number: int, description: str, passed: bool, detail: str = ""):
    CRITERION_RESULTS.append((number, description, passed, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not CRITERION_RESULTS:
        return
    terminalreporter.ensure_newline()
    terminalreporter.section("acceptance criteria")
    for number, desc, passed, detail in sorted(CRITERION_RESULTS):
        status = "PASS" if passed else "FAIL"
        line = f"[{status}] criterion {number:2d}: {desc}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)
