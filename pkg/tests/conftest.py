import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record():
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""

    def _record(number: int, ok: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
