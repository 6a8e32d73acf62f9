import pytest

_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_KEY] = []


@pytest.fixture
def record_criterion(request):
    """Log one acceptance line; printed together at the end of the session."""
    lines = request.config.stash[_KEY]

    def record(number: int, passed: bool, detail: str) -> None:
        lines.append((number, passed, detail))

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = sorted(config.stash.get(_KEY, []))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in lines:
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
