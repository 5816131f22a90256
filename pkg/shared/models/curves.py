"""
平面曲線・領域・スライスのデータモデル
"""

from typing import List, Literal, Optional, Tuple, Union, Annotated
from pydantic import BaseModel, Field, field_validator

from .functions import Fn1D, PolynomialFn


class ParabolaChain(BaseModel):
    """x1 = vertex + sign·d(x2)²、d は offset + period·Z への距離"""

    kind: Literal["parabola_chain"] = "parabola_chain"
    offset: float = Field(0.0, description="頂点列の中心オフセット")
    sign: Literal[1, -1] = Field(1, description="開く向き")
    period: float = Field(4.0, gt=0, description="x2 方向の周期")
    vertex: float = Field(..., description="頂点の高さ")

    @classmethod
    def s1(cls) -> 'ParabolaChain':
        """x1 = (x2 - 4j)² - 1/2"""
        return cls(offset=0.0, sign=1, period=4.0, vertex=-0.5)

    @classmethod
    def s2(cls) -> 'ParabolaChain':
        """x1 = 1/2 - (x2 - 4j - 2)²"""
        return cls(offset=2.0, sign=-1, period=4.0, vertex=0.5)


class Circle(BaseModel):
    """x1² + x2² = level"""

    kind: Literal["circle"] = "circle"
    level: float = Field(..., gt=0, description="円のレベル（半径は √level）")

    @property
    def radius(self) -> float:
        return self.level ** 0.5


class FnGraph(BaseModel):
    """{(f(x2), x2)}"""

    kind: Literal["fn_graph"] = "fn_graph"
    f: Fn1D = Field(..., description="x1 を与える関数")

    @classmethod
    def level_line(cls, height: float) -> 'FnGraph':
        """x1 = height の直線"""
        return cls(f=PolynomialFn(coefficients=[height]))

    @property
    def is_level_line(self) -> bool:
        return isinstance(self.f, PolynomialFn) and self.f.is_constant


class Transformed(BaseModel):
    """base を x ↦ A x + b で写した曲線"""

    kind: Literal["transformed"] = "transformed"
    base: "PlaneCurve" = Field(..., description="元の曲線")
    matrix: List[List[float]] = Field(..., description="2×2 行列 A")
    translation: List[float] = Field(default_factory=lambda: [0.0, 0.0], description="並進 b")

    @field_validator('matrix')
    @classmethod
    def check_matrix(cls, v):
        if len(v) != 2 or any(len(row) != 2 for row in v):
            raise ValueError("matrix must be 2x2")
        det = v[0][0] * v[1][1] - v[0][1] * v[1][0]
        if abs(det) < 1e-14:
            raise ValueError("matrix must be invertible")
        return v

    @field_validator('translation')
    @classmethod
    def check_translation(cls, v):
        if len(v) != 2:
            raise ValueError("translation must have two components")
        return v


PlaneCurve = Annotated[
    Union[ParabolaChain, Circle, FnGraph, Transformed],
    Field(discriminator="kind"),
]

Transformed.model_rebuild()


class Constraint(BaseModel):
    """領域の半空間制約 side·implicit(x) ≥ 0"""

    curve: PlaneCurve = Field(..., description="境界曲線")
    side: Literal[1, -1] = Field(1, description="領域側の符号")
    label: str = Field("", description="表示名（S1, S2 など）")


class Window(BaseModel):
    """解析窓"""

    x1: Tuple[float, float] = Field(..., description="x1 範囲")
    x2: Tuple[float, float] = Field(..., description="x2 範囲")

    @field_validator('x1', 'x2')
    @classmethod
    def check_range(cls, v):
        if not v[0] < v[1]:
            raise ValueError("window range must be increasing")
        return v

    def contains(self, x1: float, x2: float) -> bool:
        return self.x1[0] <= x1 <= self.x1[1] and self.x2[0] <= x2 <= self.x2[1]

    def widened_x2(self, factor: float = 2.0) -> 'Window':
        center = 0.5 * (self.x2[0] + self.x2[1])
        half = 0.5 * factor * (self.x2[1] - self.x2[0])
        return Window(x1=self.x1, x2=(center - half, center + half))


class PlanarRegion(BaseModel):
    """制約の共通部分と解析窓"""

    name: str = Field("region", description="領域名")
    constraints: List[Constraint] = Field(default_factory=list, description="半空間制約")
    window: Window = Field(..., description="解析窓")
    period: Optional[float] = Field(None, gt=0, description="x2 方向の周期")

    @property
    def is_periodic(self) -> bool:
        return self.period is not None

    def without(self, index: int) -> 'PlanarRegion':
        """index 番目の制約を除いた領域"""
        kept = [c for k, c in enumerate(self.constraints) if k != index]
        return self.model_copy(update={"constraints": kept})


class SliceInterval(BaseModel):
    """スライス内の閉区間"""

    lo: float = Field(..., description="下端 x2")
    hi: float = Field(..., description="上端 x2")
    lo_source: Optional[int] = Field(None, description="下端を生成した制約番号")
    hi_source: Optional[int] = Field(None, description="上端を生成した制約番号")
    lo_truncated: bool = Field(False, description="下端が窓で切断")
    hi_truncated: bool = Field(False, description="上端が窓で切断")

    @property
    def degenerate(self) -> bool:
        return self.hi - self.lo <= 0.0

    @property
    def truncated(self) -> bool:
        return self.lo_truncated or self.hi_truncated

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def overlaps(self, other: 'SliceInterval') -> bool:
        return self.lo <= other.hi and other.lo <= self.hi


class Slice(BaseModel):
    """高さ x1 での領域の切り口"""

    height: float = Field(..., description="x1 の値")
    intervals: List[SliceInterval] = Field(default_factory=list, description="昇順の互いに素な閉区間")
    unresolved: List[Tuple[float, float]] = Field(
        default_factory=list, description="根が集積して列挙しきれない x2 範囲"
    )

    @property
    def proper_intervals(self) -> List[SliceInterval]:
        """退化していない区間"""
        return [iv for iv in self.intervals if not iv.degenerate]

    @property
    def degenerate_points(self) -> List[float]:
        return [iv.lo for iv in self.intervals if iv.degenerate]

    @property
    def count(self) -> int:
        return len(self.proper_intervals)

    def covers(self, x2: float, tol: float = 0.0) -> bool:
        return any(iv.lo - tol <= x2 <= iv.hi + tol for iv in self.intervals)


class BoundaryEvent(BaseModel):
    """臨界高さの候補"""

    height: float = Field(..., description="x1 の高さ")
    tag: Literal["vertex-tangency", "corner", "end", "detected"] = Field(..., description="種別")
    witnesses: List[float] = Field(default_factory=list, description="事象が起きる x2 位置")
