"""Collects the acceptance verdicts and prints them after the run."""
import pytest

VERDICTS = {}


@pytest.fixture
def verdict():
    """``verdict(k, ok, detail)`` records and prints one line per criterion."""

    def record(k, ok, detail):
        line = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"
        VERDICTS[str(k)] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(VERDICTS):
        terminalreporter.write_line(VERDICTS[k])
