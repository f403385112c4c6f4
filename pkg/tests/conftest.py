import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def criterion_line():
    """Record one pass/fail line for the terminal summary and print it."""

    def record(number, ok, detail):
        line = f"[criterion {number:2d}] {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
