import os

import hypothesis
import numpy as np
import pytest

from emoxling.synthetic import write_fixture

hypothesis.settings.register_profile("default", deadline=None, max_examples=60)
hypothesis.settings.register_profile("ci", deadline=None, max_examples=200)
hypothesis.settings.register_profile("fast", deadline=None, max_examples=10)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

np.seterr(all="raise", under="ignore")

_criteria: dict[str, str] = {}


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory):
    """Synthetic bilingual data written once per session; treat as read-only."""
    out = tmp_path_factory.mktemp("fixture")
    return write_fixture(out)


def pytest_runtest_logreport(report):
    name = getattr(report, "criterion", None)
    if name is None or _criteria.get(name) == "FAIL":
        return
    if report.failed:
        _criteria[name] = "FAIL"
    elif report.skipped:
        _criteria.setdefault(name, "SKIP")
    elif report.when == "call":
        _criteria[name] = "PASS"


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        report.criterion = mark.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, status in _criteria.items():
        terminalreporter.write_line(f"ACCEPTANCE {status:<4} {name}")
