"""Shared fixtures and the acceptance-criterion report.

Acceptance tests carry ``@pytest.mark.criterion(number, title)``. Each test's
outcome becomes one PASS/FAIL line in the terminal summary. A test can attach
a detail string, or downgrade itself to a soft flag, through the ``criterion``
fixture.
"""

import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


class CriterionNote:
    def __init__(self, item):
        self.item = item

    def detail(self, text: str) -> None:
        self.item.user_properties.append(("criterion_detail", text))

    def soft_fail(self, text: str) -> None:
        self.item.user_properties.append(("criterion_soft_fail", text))


@pytest.fixture
def criterion(request):
    return CriterionNote(request.node)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    failed_here = report.failed
    if report.when == "call" or failed_here:
        props = dict(item.user_properties)
        if failed_here:
            status = "FAIL"
        elif report.skipped:
            status = "SKIP"
        elif "criterion_soft_fail" in props:
            status = "FLAG"
        else:
            status = "PASS"
        detail = props.get("criterion_soft_fail") or props.get("criterion_detail", "")
        if failed_here and report.longrepr is not None:
            detail = (detail + " | " if detail else "") + str(report.longreprtext).strip().splitlines()[-1]
        _RESULTS[number] = (status, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        status, title, detail = _RESULTS[number]
        line = f"{status} criterion {number:>2}: {title}"
        if detail:
            line += f" -- {detail}"
        terminalreporter.write_line(line)
