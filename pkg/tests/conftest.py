import textwrap

import pytest

SCENE = textwrap.dedent(
    """\
    width = 32
    height = 32
    count = 6
    looks = 1.0
    multilook = 3
    reflectivity = 1.0
    start = "2020-01-01"
    interval_days = 12

    [[changes]]
    kind = "step"
    region = [0, 16, 0, 16]
    onset = 4
    factor = 16.0

    [[changes]]
    kind = "impulse"
    region = [16, 32, 16, 32]
    onset = 3
    offset = 5
    factor = 16.0
    """
)


@pytest.fixture
def scene_file(tmp_path):
    path = tmp_path / "scene.toml"
    path.write_text(SCENE)
    return path


# acceptance criterion name -> passed so far, and measured values
_CRITERIA = {}
_DETAILS = {}


@pytest.fixture
def measured(request):
    """Record a measured value shown next to the criterion's summary line."""
    marker = request.node.get_closest_marker("criterion")
    name = marker.args[0] if marker else request.node.name

    def record(text):
        _DETAILS.setdefault(name, []).append(text)

    return record


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion reported in the summary")


def pytest_runtest_logreport(report):
    name = getattr(report, "criterion", None)
    if name is None or (report.when != "call" and report.passed):
        return
    _CRITERIA[name] = _CRITERIA.get(name, True) and report.passed


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        report.criterion = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok in _CRITERIA.items():
        details = "; ".join(_DETAILS.get(name, []))
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  [{details}]" if details else ""))
