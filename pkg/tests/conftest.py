import pytest

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.failed and rep.when == "setup"):
        number, title = mark.args
        _criteria[number] = (title, rep.passed, getattr(item, "detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_criteria):
        title, passed, detail = _criteria[number]
        status = "PASS" if passed else "FAIL"
        line = f"criterion {number:2d}  {status}  {title}"
        terminalreporter.write_line(f"{line}  [{detail}]" if detail else line)


@pytest.fixture
def detail(request):
    """Attach a one-line measurement summary to the acceptance report."""

    def record(text):
        request.node.detail = text
        print(text)

    return record
