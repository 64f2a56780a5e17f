"""Shared test plumbing: collects acceptance criterion verdict lines.

Each acceptance test reports one human-readable pass/fail line through
record_criterion; the lines are printed immediately (visible with -s or
on failure) and repeated in a dedicated section of the terminal summary
so a plain `pytest -v` run still shows every verdict.
"""

ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, ok: bool, detail: str) -> str:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}"
    print(line, flush=True)
    ACCEPTANCE_LINES.append(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
