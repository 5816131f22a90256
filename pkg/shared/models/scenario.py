"""
シナリオ関連のデータモデル
"""

from typing import List, Optional, Union, Literal, Dict, Any, Tuple
from enum import Enum
from pydantic import BaseModel, Field, field_validator, model_validator

from .curves import PlanarRegion
from .zgraph import ZSpec
from .lift import SuspensionMap


class ScenarioName(str, Enum):
    """名前付きシナリオ"""
    THM1 = "thm1"
    THM3_CASE1 = "thm3-case1"
    THM3_CASE2 = "thm3-case2"
    THM3_CASE3 = "thm3-case3"
    DISK = "disk"
    CUSTOM = "custom"


class CheckName(str, Enum):
    """実行可能な検査"""
    REEB = "reeb"
    ACCUMULATION = "accumulation"
    ZGRAPH = "zgraph"
    REMARK1 = "remark1"
    MANIFOLD = "manifold"
    PROPERNESS = "properness"
    ORACLE_COMPARE = "oracle-compare"


# 依存順
CHECK_ORDER = [
    CheckName.REEB, CheckName.ACCUMULATION, CheckName.PROPERNESS, CheckName.ZGRAPH,
    CheckName.REMARK1, CheckName.MANIFOLD, CheckName.ORACLE_COMPARE,
]


class ScenarioParameters(BaseModel):
    """シナリオパラメータ（未指定は既定値で補完）"""

    m1: Optional[int] = Field(None, ge=1)
    m2: Optional[int] = Field(None, ge=1)
    R0: Optional[float] = Field(None, gt=0, description="円のレベル")
    R: Optional[float] = Field(None, gt=0, description="S-D-CRAn スケール")
    theta: Union[float, Literal["auto"]] = Field("auto", description="回転角（ラジアン）または auto")
    t1: Optional[float] = Field(None, description="ケース2の平行移動量（未指定は円の式から決定）")
    t2: Optional[float] = Field(None, gt=0, lt=1, description="ケース2の x2 圧縮率")
    window: Optional[Tuple[float, float]] = Field(None, description="x2 窓")
    period: Optional[float] = Field(None, gt=0)
    seed: Optional[int] = None
    samples: Optional[int] = Field(None, ge=0)
    oracle_grid: Optional[Tuple[int, int]] = None
    tolerances: Dict[str, float] = Field(default_factory=dict, description="許容値の上書き")

    @field_validator('window')
    @classmethod
    def check_window(cls, v):
        if v is not None and not v[0] < v[1]:
            raise ValueError("window must be increasing")
        return v


class Scenario(BaseModel):
    """実行シナリオ"""

    name: ScenarioName = Field(..., description="シナリオ名")
    parameters: ScenarioParameters = Field(default_factory=ScenarioParameters)
    checks: List[CheckName] = Field(default_factory=lambda: [CheckName.REEB], description="検査")
    region: Optional[PlanarRegion] = Field(None, description="custom 用の領域")
    zspec: Optional[ZSpec] = Field(None, description="custom 用の Z")
    suspension: Optional[SuspensionMap] = Field(None, description="custom 用の懸垂写像")

    @model_validator(mode='after')
    def check_custom(self):
        if self.name == ScenarioName.CUSTOM and self.region is None:
            raise ValueError("custom scenarios must supply a region with inline curve specs")
        return self

    @property
    def ordered_checks(self) -> List[CheckName]:
        return [c for c in CHECK_ORDER if c in self.checks]


class CheckResult(BaseModel):
    """検査結果"""

    check: CheckName
    passed: bool
    expected: Optional[str] = Field(None, description="期待される判定")
    observed: Optional[str] = Field(None, description="得られた判定")
    measured: Dict[str, Any] = Field(default_factory=dict, description="測定値")


class RunReport(BaseModel):
    """report.json"""

    scenario: str
    parameters: Dict[str, Any] = Field(default_factory=dict)
    checks: List[CheckResult] = Field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def exit_code(self) -> int:
        return 0 if self.all_passed else 1
