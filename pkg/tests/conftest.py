import re

import pytest

_LINES: list[tuple[float, str]] = []


@pytest.fixture
def criterion():
    """Record one pass/fail line for the acceptance summary; returns the verdict."""

    def record(number, ok: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        key = float(re.match(r"[\d.]+", str(number)).group(0))
        _LINES.append((key, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_LINES, key=lambda r: r[0]):
            terminalreporter.write_line(line)
