import numpy as np
import pytest

from qbsacd.acd import ParamVector
from qbsacd.mcstudy import simulate_series

# design of the simulation tables
TABLE_THETA = ParamVector(0.5, 0.2, (0.7,), (0.1,), -0.5, 0.5)


def simulate(theta, n, seed, burn_in=100):
    return simulate_series(theta, n, np.random.default_rng(seed), burn_in=burn_in)


@pytest.fixture(scope="session")
def table_theta():
    return TABLE_THETA


@pytest.fixture(scope="session")
def sim200():
    """n=200 skew-QBS-ACD(1,1) series at a q away from 0.5."""
    theta = ParamVector(0.6, 0.2, (0.7,), (0.1,), -0.5, 0.3)
    return theta, simulate(theta, 200, 11)


@pytest.fixture(scope="session")
def sim1000():
    return TABLE_THETA, simulate(TABLE_THETA, 1000, 5)


# --------------------------------------------------------------- acceptance report

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call":
        return
    number, title = mark.args
    details = dict(item.user_properties).get("details", "")
    if rep.failed and not details:
        details = str(call.excinfo.value).splitlines()[0] if call.excinfo else ""
    _CRITERIA[number] = ("PASS" if rep.passed else "FAIL", title, details)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, title, details = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:>2} {status}: {title} | {details}")
