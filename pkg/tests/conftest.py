import pytest

_RESULTS = {}


@pytest.fixture
def verdict():
    """Record one acceptance criterion: ``verdict(n, checks)`` with ``checks`` a dict of name -> bool."""

    def record(n, checks, detail=""):
        ok = all(bool(v) for v in checks.values())
        failed = ", ".join(k for k, v in checks.items() if not v)
        line = f"CRITERION {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}" + (f"  [failed: {failed}]" if failed else "")
        _RESULTS[n] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        terminalreporter.write_line(_RESULTS[n])
