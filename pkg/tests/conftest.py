import pytest

# (criterion, passed, detail) lines collected by the acceptance suite
ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    def record(name, passed, detail=""):
        ACCEPTANCE_LINES.append((name, bool(passed), detail))
        print(f"[{'PASS' if passed else 'FAIL'}] criterion {name}: {detail}")
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {name}: {detail}")
