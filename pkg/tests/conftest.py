"""
共通フィクスチャ
"""

import pytest

from shared.models.curves import Circle, Constraint, PlanarRegion, Window
from shared.models.scenario import Scenario, ScenarioName
from backend.src.config.settings import reset_settings
from backend.src.services.curvekit import curvekit_service
from backend.src.services.scenario_service import scenario_service


@pytest.fixture
def clean_settings():
    """設定シングルトンを作り直す"""
    reset_settings()
    yield
    reset_settings()


@pytest.fixture(scope="session")
def thm1_region() -> PlanarRegion:
    """S1, S2 と帯 |x1| ≤ 1 の周期領域（x2 窓 [-6, 6]）"""
    return scenario_service.thm1_region((-6.0, 6.0), 4.0)


@pytest.fixture(scope="session")
def thm1_strip(thm1_region) -> PlanarRegion:
    """周期を外した切断版"""
    return thm1_region.model_copy(update={"period": None})


@pytest.fixture(scope="session")
def disk_region() -> PlanarRegion:
    """x1² + x2² ≤ 1"""
    return PlanarRegion(
        name="disk",
        constraints=[Constraint(curve=Circle(level=1.0), side=1, label="S_1,R0")],
        window=Window(x1=(-1.2, 1.2), x2=(-1.2, 1.2)),
    )


@pytest.fixture(scope="session")
def c0():
    """c0 = p_{0,1} ∘ (0.01·e^{-1/x²} sin²(1/x))"""
    return curvekit_service.oscillating_profile(1.0, 0.01)


@pytest.fixture(scope="session")
def case1_build():
    return scenario_service.build(Scenario(name=ScenarioName.THM3_CASE1))


@pytest.fixture(scope="session")
def case2_build():
    return scenario_service.build(Scenario(name=ScenarioName.THM3_CASE2))


@pytest.fixture(scope="session")
def case3_build():
    return scenario_service.build(Scenario(name=ScenarioName.THM3_CASE3))


@pytest.fixture(scope="session")
def thm1_build():
    return scenario_service.build(Scenario(name=ScenarioName.THM1))


@pytest.fixture(scope="session")
def disk_build():
    return scenario_service.build(Scenario(name=ScenarioName.DISK))
