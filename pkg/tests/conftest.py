import pytest

from mosersys import ModelParams, build_domain, solve_scalar_ground_state
from mosersys.constants import beta_thresholds

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    entry = _CRITERIA.setdefault(number, {"title": title, "ok": True, "ran": False, "detail": ""})
    if rep.when == "call":
        entry["ran"] = True
    if rep.failed or rep.skipped:
        entry["ok"] = False
    if rep.when == "call" and not rep.passed:
        entry["detail"] = rep.longreprtext.strip().splitlines()[-1] if rep.longreprtext else rep.outcome


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        status = "PASS" if e["ok"] and e["ran"] else "FAIL"
        line = f"criterion {number:2d} {status}  {e['title']}"
        if status == "FAIL" and e["detail"]:
            line += f"  ({e['detail']})"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def square63():
    return build_domain("unit-square", 63)


@pytest.fixture(scope="session")
def square31():
    return build_domain("unit-square", 31)


@pytest.fixture(scope="session")
def gs_square63(square63):
    return solve_scalar_ground_state(square63, 0.0, 1.0)


@pytest.fixture(scope="session")
def sym_params():
    return ModelParams(0.0, 0.0, 1.0, 1.0, 0.0)


@pytest.fixture(scope="session")
def thresholds63(square63, gs_square63, sym_params):
    return beta_thresholds(square63, gs_square63, gs_square63, sym_params)
