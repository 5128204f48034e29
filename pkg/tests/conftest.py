import pytest

from risrefine.geometry import SceneGeometry, SurfaceLayout
from risrefine.optimizer import standard_families
from risrefine.synthlab import AlphaProfile


@pytest.fixture(scope="session")
def scene():
    return SceneGeometry()


@pytest.fixture(scope="session")
def small_scene():
    # 4x4 surface, same physical pitch; keeps per-test cost low
    return SceneGeometry(layout=SurfaceLayout(4, 4, 0.0225, 0.247 / 16))


@pytest.fixture(scope="session")
def profile():
    return AlphaProfile()


@pytest.fixture(scope="session")
def fit_families(scene):
    """single + single_tiled families on the default scene."""
    return standard_families(scene)


ACCEPTANCE_LINES = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py::test_ac" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        detail = dict(report.user_properties).get("detail", "")
        ACCEPTANCE_LINES.append(f"{'PASS' if report.passed else 'FAIL'}  {name}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
