import pytest

_CRITERIA = pytest.StashKey[dict]()


@pytest.fixture
def record_criterion(request):
    """Store one acceptance line: ``record_criterion("A1", passed, "detail")``."""
    store = request.config.stash.setdefault(_CRITERIA, {})

    def record(name: str, passed: bool, detail: str) -> None:
        line = f"{name} {'PASS' if passed else 'FAIL'}  {detail}"
        store[name] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_CRITERIA, {})
    if not store:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name in sorted(store, key=lambda n: int(n[1:])):
        terminalreporter.write_line(store[name])
