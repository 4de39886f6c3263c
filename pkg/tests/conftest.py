import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(cid, ok, detail)``; returns ``ok``."""

    def record(cid, ok, detail):
        _CRITERIA[cid] = (bool(ok), detail)
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_CRITERIA, key=lambda c: int(c[1:])):
        ok, detail = _CRITERIA[cid]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {cid} {detail}")
