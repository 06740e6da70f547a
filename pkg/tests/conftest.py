import pytest


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "oracle: slow cross-checks against independent reference code")
    config.addinivalue_line(
        "markers", "acceptance: end-to-end acceptance criteria")


@pytest.fixture(scope="session")
def criterion_report(request):
    """Collector for the acceptance criteria verdict lines.

    Each acceptance test records its one PASS/FAIL line before asserting,
    so the full scoreboard appears at the end of the run even when a
    criterion fails.
    """
    if not hasattr(request.config, "_criterion_lines"):
        request.config._criterion_lines = []
    lines = request.config._criterion_lines

    def record(line: str) -> None:
        lines.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_criterion_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
