"""Collects acceptance-criterion outcomes and prints them after the run."""
import pytest

_OUTCOMES = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call":
        return
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    _OUTCOMES.append((marker.args[0], report.passed, detail, report.duration))


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail, secs in _OUTCOMES:
        line = f"{'PASS' if ok else 'FAIL'}  {name}  [{secs:.1f}s]"
        if detail:
            line += f"  {detail}"
        terminalreporter.write_line(line)
