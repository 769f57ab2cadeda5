import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_RESULTS = {}


@pytest.fixture
def criterion():
    """Record an acceptance line: ``criterion(key, passed, detail)``."""

    def record(key, passed, detail=""):
        _RESULTS[key] = (bool(passed), detail)
        return bool(passed)

    return record


def _order(key):
    head = "".join(ch for ch in key if ch.isdigit())
    return (int(head) if head else 0, key)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_RESULTS, key=_order):
        passed, detail = _RESULTS[key]
        terminalreporter.write_line(f"criterion {key:<4} {'PASS' if passed else 'FAIL'}  {detail}")
