import pytest

ACCEPTANCE_RESULTS = {}


@pytest.fixture
def acceptance_record(request):
    """Store a one-line verdict for an acceptance criterion."""

    def record(criterion, passed, detail=""):
        ACCEPTANCE_RESULTS[criterion] = (bool(passed), detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}: {detail}")
