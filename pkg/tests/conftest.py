import pytest

_ACCEPTANCE_LINES = []


@pytest.fixture
def criterion(request):
    """Record a PASS/FAIL line for an acceptance criterion.

    Usage: ``criterion("AC3 Crofton bound")`` at the top of the test.
    """
    labels = []

    def register(label):
        labels.append(label)

    yield register
    failed = getattr(request.node, "rep_call", None)
    status = "FAIL" if failed is None or failed.failed else "PASS"
    for label in labels:
        _ACCEPTANCE_LINES.append(f"[{status}] {label}")


@pytest.hookimpl(hookwrapper=True, tryfirst=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
