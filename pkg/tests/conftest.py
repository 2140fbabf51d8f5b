import pytest

VERDICTS: dict = {}


@pytest.fixture
def criterion(request):
    """Record a pass/fail line for an acceptance criterion.

    The criterion is marked FAIL unless the test body completes.
    """
    key, label = request.node.get_closest_marker("criterion").args
    VERDICTS[key] = (label, False)
    yield
    VERDICTS[key] = (label, True)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, label): acceptance criterion tracked in the summary")


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(VERDICTS):
        label, ok = VERDICTS[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {key}: {label}")
