import pytest

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def report_criterion():
    def report(number: int, title: str, checks) -> str:
        ok = all(c.passed for c in checks)
        failed = [f"{c.name} ({c.value:.3g}, needs {c.threshold})" for c in checks if not c.passed]
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {title} [{len(checks)} checks]" + (
            f" failing: {'; '.join(failed)}" if failed else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        return line
    return report
