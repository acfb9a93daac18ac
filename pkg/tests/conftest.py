import pytest

_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record ``(id, passed, detail)`` for the acceptance summary."""

    def record(cid, passed, detail=""):
        _CRITERIA[str(cid)] = (bool(passed), detail)
        print(f"criterion {cid}: {'PASS' if passed else 'FAIL'} {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_CRITERIA, key=lambda c: (int(c.rstrip("abcd")), c)):
        ok, detail = _CRITERIA[cid]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {cid}: {detail}")
