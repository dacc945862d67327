import pytest

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    ok = report.passed if report.when == "call" else not report.failed
    _, passed, notes = _criteria.get(number, (title, True, []))
    text = getattr(item, "criterion_detail", "")
    if report.when == "call" and text:
        notes = notes + [text]
    _criteria[number] = (title, passed and ok, notes)


@pytest.fixture
def detail(request):
    """Record a one-line measurement that is echoed next to the criterion result."""

    def record(text):
        request.node.criterion_detail = text

    return record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, ok, notes = _criteria[number]
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}"
        if notes:
            line += f" ({'; '.join(notes)})"
        terminalreporter.write_line(line)
