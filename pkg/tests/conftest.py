import pytest

ACCEPTANCE = {}


@pytest.fixture(scope="session")
def record():
    """Record ``(criterion, ok, detail)``; lines are echoed immediately and in the summary."""

    def _record(key, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] {key}: {detail}"
        ACCEPTANCE[key] = line
        print(line)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0].rstrip("."))):
        terminalreporter.write_line(ACCEPTANCE[key])
