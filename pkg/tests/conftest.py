import pytest

_LINES = []


@pytest.fixture
def report():
    """Record one pass/fail line for the acceptance summary."""

    def record(label, passed, detail):
        _LINES.append(f"{label:<6} {'PASS' if passed else 'FAIL'}  {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[0][2:])):
            terminalreporter.write_line(line)
