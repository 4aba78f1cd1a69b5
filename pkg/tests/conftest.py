from pathlib import Path

import pytest

TESTS = Path(__file__).parent
GOLDEN_DIR = TESTS / "golden"

_criteria: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record the verdict of one acceptance criterion for the end-of-run summary."""

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _criteria[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        terminalreporter.write_line(_criteria[n])
