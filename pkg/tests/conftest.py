"""Shared pytest hooks: collects acceptance outcomes and prints one line per criterion."""

import pytest

_acceptance = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(criterion, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or "criterion" not in mark.kwargs:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        detail = dict(item.user_properties).get("detail", "")
        if rep.failed and not detail:
            crash = getattr(rep.longrepr, "reprcrash", None)
            detail = crash.message.splitlines()[0] if crash else "error"
        _acceptance[mark.kwargs["criterion"]] = (mark.kwargs["title"], rep.passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_acceptance):
        title, ok, detail = _acceptance[k]
        terminalreporter.write_line(f"AC{k:02d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
