import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record():
    """Register a one-line acceptance verdict for the terminal summary."""

    def _record(label: str, passed: bool, detail: str) -> None:
        line = f"{label}: {'PASS' if passed else 'FAIL'} - {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
