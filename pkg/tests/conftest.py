import pytest


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): numbered acceptance criterion")
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or rep.outcome != "passed":
        n, text = mark.args
        prev = item.config._criteria.get(n, (text, "passed"))[1]
        item.config._criteria[n] = (text, rep.outcome if prev == "passed" else prev)


def pytest_terminal_summary(terminalreporter, config):
    crit = getattr(config, "_criteria", {})
    if not crit:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(crit):
        text, outcome = crit[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if outcome == 'passed' else 'FAIL'}  {text}")
