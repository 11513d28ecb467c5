import pytest

# acceptance criteria append (number, status, line); printed once at the end of the session
ACCEPTANCE_LINES: list[tuple[int, str, str]] = []


@pytest.fixture
def record():
    def _record(number: int, passed: bool | None, text: str):
        status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
        ACCEPTANCE_LINES.append((number, status, text))
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, text in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"[{status}] criterion {number:2d}: {text}")
