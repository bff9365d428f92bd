import numpy as np
import pytest

from trackspace.core import SensorSpec, SurveyArea
from trackspace.pdmodel import PdCurve, PdCurveParams, synth_curve

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and not report.failed):
        return
    number, title = marker.args
    _, passed, detail = _criteria.get(number, (title, True, ""))
    if report.failed:
        crash = getattr(report.longrepr, "reprcrash", None)
        detail = detail or (crash.message if crash else str(report.longrepr))
        passed = False
    _criteria[number] = (title, passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, passed, detail = _criteria[number]
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title}"
        if not passed and detail:
            line += f" -- {detail.splitlines()[0][:160]}"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def true_curve():
    """Default synthetic curve: peak 0.4 at 70 m, P_d = 0.05 at 130 m."""
    return synth_curve(PdCurveParams.with_tail(130.0, 0.05), 40.0, 150.0)


@pytest.fixture(scope="session")
def survey_area():
    return SurveyArea(1212.0, 400.0, 5.0)


def constant_curve(value, r_min=40.0, support=200.0):
    y = np.arange(0.0, support + 1.0)
    return PdCurve(y, np.where(y >= r_min, value, 0.0), r_min)


def sensor(r_planned, r_true=130.0, r_min=40.0):
    return SensorSpec(r_min, r_planned, r_true)
