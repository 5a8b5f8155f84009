import pytest

ACCEPTANCE_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(name): marks a test as one acceptance criterion"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker and report.when == "call":
        name = marker.args[0]
        ACCEPTANCE_RESULTS[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, outcome in sorted(ACCEPTANCE_RESULTS.items()):
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"  {name}: {status}")
