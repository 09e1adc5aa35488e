import pytest

_CRITERIA = {}


@pytest.fixture(scope="session")
def criterion_log():
    """Record ``(number, title, passed, detail)`` for the acceptance summary."""

    def record(number: int, title: str, passed: bool, detail: str):
        _CRITERIA.setdefault(number, []).append((title, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        for title, passed, detail in _CRITERIA[number]:
            status = "PASS" if passed else "FAIL"
            terminalreporter.write_line(f"criterion {number} [{status}] {title}: {detail}")
