import sys

import pytest

THETAS = (0.3, 0.5, 0.7)


@pytest.fixture(params=THETAS, ids=lambda t: f"theta={t}")
def theta(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number].line())
