"""
懸垂写像 e(x1,x2,y1,y2) = (f1 - |y1|², f2 - |y2|²) と検証結果のモデル
"""

from typing import List, Optional, Dict, Any
from pydantic import BaseModel, Field

from .curves import Constraint, PlanarRegion, Window


class SuspensionMap(BaseModel):
    """f1, f2 を制約値の積で与える懸垂写像"""

    name: str = Field("e", description="写像名")
    f1_factors: List[Constraint] = Field(..., min_length=1, description="f1 の因子")
    f2_factors: List[Constraint] = Field(..., min_length=1, description="f2 の因子")
    m1: int = Field(1, ge=1, description="y1 ブロックの次元")
    m2: int = Field(1, ge=1, description="y2 ブロックの次元")
    window: Window = Field(..., description="標本化の窓")

    @property
    def dimension(self) -> int:
        return self.m1 + self.m2 + 2

    def plane_region(self) -> PlanarRegion:
        """{f1 ≥ 0, f2 ≥ 0} を全因子の制約として表した領域"""
        return PlanarRegion(
            name=f"{self.name}-plane",
            constraints=list(self.f1_factors) + list(self.f2_factors),
            window=self.window,
        )

    def swapped(self) -> 'SuspensionMap':
        """m1 と m2 の入れ替え（平面像は不変）"""
        return self.model_copy(update={"m1": self.m2, "m2": self.m1})


class RankResult(BaseModel):
    """一点でのヤコビアン数値ランク"""

    rank: int = Field(..., description="数値ランク")
    singular_values: List[float] = Field(..., description="特異値")
    gap_shifted: bool = Field(False, description="片側差分に切り替えたか")


class RankReport(BaseModel):
    """標本全体のランク検査"""

    pass_count: int = Field(0, description="合格数")
    skipped_near_gap: int = Field(0, description="非解析点近傍で除外した数")
    max_residual: float = Field(0.0, description="max |e|")
    fail_list: List[Dict[str, Any]] = Field(default_factory=list, description="不合格点")

    @property
    def passed(self) -> bool:
        return not self.fail_list


class CriticalCountReport(BaseModel):
    """座標射影の臨界等高線の数"""

    axis: int = Field(..., description="射影軸（0 = x1, 1 = x2）")
    count: int = Field(..., description="内部の臨界等高線の数")
    end_count: int = Field(0, description="端の事象の数")
    heights: List[float] = Field(default_factory=list, description="臨界高さ")
    note: Optional[str] = None
