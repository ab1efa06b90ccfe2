import pytest

_ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def acceptance_report():
    """Record one PASS/FAIL line per acceptance criterion."""

    def report(number: int, ok: bool, detail: str) -> bool:
        _ACCEPTANCE_LINES[number] = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        print(_ACCEPTANCE_LINES[number])
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(_ACCEPTANCE_LINES[number])
