"""
一変数関数族のデータモデル

多項式・S-D-CRAn 関数・合成・Example-1 型の平坦関数・区分ブレンドを
"kind" で判別されるモデルとして表現する。数値評価は curvekit サービスが担う。
"""

from typing import List, Literal, Optional, Union, Annotated
from pydantic import BaseModel, Field, field_validator, model_validator


MAX_TRIG_DEGREE = 8


class TrigTerm(BaseModel):
    """(1/x)^i · T(sin(1/x), cos(1/x)) の一項"""

    i: int = Field(..., ge=0, description="(1/x) の非負指数 i_j")
    T: List[List[float]] = Field(..., description="T[a][b] = sin^a cos^b の係数")

    @field_validator('T')
    @classmethod
    def check_matrix(cls, v):
        if not v or not v[0]:
            raise ValueError("T must be a non-empty coefficient matrix")
        width = len(v[0])
        if any(len(row) != width for row in v):
            raise ValueError("T rows must have equal length")
        if len(v) > MAX_TRIG_DEGREE + 1 or width > MAX_TRIG_DEGREE + 1:
            raise ValueError(f"T degree exceeds {MAX_TRIG_DEGREE}")
        return v


class PolynomialFn(BaseModel):
    """多項式（昇冪の係数列）"""

    kind: Literal["polynomial"] = "polynomial"
    coefficients: List[float] = Field(..., min_length=1, description="昇冪係数 c0 + c1 x + ...")

    @property
    def is_constant(self) -> bool:
        return all(c == 0.0 for c in self.coefficients[1:])


class SDCRAnFn(BaseModel):
    """R·e^{-1/x²}·(1/x)^{j0}·Σ (1/x)^{i_j} T_j(sin(1/x), cos(1/x))、x=0 で 0"""

    kind: Literal["sdcran"] = "sdcran"
    R: float = Field(..., description="スケール（非零）")
    j0: int = Field(0, description="共通指数")
    terms: List[TrigTerm] = Field(..., min_length=1, description="項のリスト")

    @field_validator('R')
    @classmethod
    def check_scale(cls, v):
        if v == 0:
            raise ValueError("R must be nonzero")
        return v

    @classmethod
    def flat_sine_square(cls, R: float = 1.0) -> 'SDCRAnFn':
        """c(x) = R·e^{-1/x²}·sin²(1/x)"""
        return cls(R=R, j0=0, terms=[TrigTerm(i=0, T=[[0.0], [0.0], [1.0]])])

    @classmethod
    def flat_bump(cls, R: float = 1.0) -> 'SDCRAnFn':
        """c(x) = R·e^{-1/x²}"""
        return cls(R=R, j0=0, terms=[TrigTerm(i=0, T=[[1.0]])])


class CompositionFn(BaseModel):
    """outer(inner(x))、outer は多項式"""

    kind: Literal["composition"] = "composition"
    outer: PolynomialFn = Field(..., description="外側の多項式")
    inner: "Fn1D" = Field(..., description="内側の関数")


class ExampleOneFn(BaseModel):
    """x ≤ 0 で 0、x > 0 で e^{-1/x}"""

    kind: Literal["example_one"] = "example_one"


class BlendPiece(BaseModel):
    """区分ブレンドの一片（窓 [lo, hi] 上で fn に一致）"""

    lo: float = Field(..., description="厳密一致窓の下端")
    hi: float = Field(..., description="厳密一致窓の上端")
    fn: "Fn1D" = Field(..., description="この窓で使う関数")


class PiecewiseBlendFn(BaseModel):
    """隣接片の間をφ型平坦ステップで滑らかに接続した関数"""

    kind: Literal["piecewise_blend"] = "piecewise_blend"
    pieces: List[BlendPiece] = Field(..., min_length=1, description="左から順の片")

    @model_validator(mode='after')
    def check_order(self):
        for left, right in zip(self.pieces, self.pieces[1:]):
            if not left.lo <= left.hi < right.lo <= right.hi:
                raise ValueError("pieces must be ordered with positive blend windows between them")
        return self

    @property
    def blend_windows(self) -> List[tuple]:
        return [(a.hi, b.lo) for a, b in zip(self.pieces, self.pieces[1:])]


Fn1D = Annotated[
    Union[PolynomialFn, SDCRAnFn, CompositionFn, ExampleOneFn, PiecewiseBlendFn],
    Field(discriminator="kind"),
]

CompositionFn.model_rebuild()
BlendPiece.model_rebuild()
PiecewiseBlendFn.model_rebuild()


class FnClassification(BaseModel):
    """解析性の分類フラグ"""

    analyticity_gap: List[float] = Field(default_factory=list, description="非解析点 Z_f")
    is_dran: bool = Field(..., description="稠密実解析的か")
    is_dcran: bool = Field(..., description="稠密複素実解析的か（構造的フラグ）")


class FlatnessReport(BaseModel):
    """平坦性証明の結果"""

    passed: bool = Field(..., description="全階数で合格したか")
    max_order: int = Field(..., description="検査した最大階数")
    tol: float = Field(..., description="許容値")
    first_passing_index: List[Optional[int]] = Field(default_factory=list, description="階数ごとの k0")
    violating_order: Optional[int] = Field(None, description="最初に失敗した階数")
    violating_point: Optional[float] = Field(None, description="失敗を決めた x_k")
    violating_value: Optional[float] = Field(None, description="そこでの |f^(j)|")


class Tangency(BaseModel):
    """曲線上の x1 の極値（鉛直接線）"""

    param: float = Field(..., description="曲線パラメータ")
    x1: float = Field(..., description="平面点の x1（高さ）")
    x2: float = Field(..., description="平面点の x2")
    kind: Literal["max", "min"] = Field(..., description="x1 の極大か極小か")
