import pytest

_VERDICTS = {}


@pytest.fixture
def verdict(request):
    """Record one acceptance line per criterion; printed in the terminal summary."""

    def record(criterion, ok, detail):
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"
        _VERDICTS[criterion] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_VERDICTS):
        terminalreporter.write_line(_VERDICTS[key])
