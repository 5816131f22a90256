"""
非解析集合 Z とその像、(R_c,Z)-グラフ判定のデータモデル
"""

from typing import List, Literal, Optional, Tuple, Union, Annotated, Dict, Any
from pydantic import BaseModel, Field

from .curves import PlaneCurve
from .reeb import ReebGraph


class ZPoint(BaseModel):
    """孤立点"""

    kind: Literal["point"] = "point"
    x1: float
    x2: float


class ZSegment(BaseModel):
    """線分（水平線分は start/end の x2 が等しい場合）"""

    kind: Literal["segment"] = "segment"
    start: Tuple[float, float] = Field(..., description="始点")
    end: Tuple[float, float] = Field(..., description="終点")

    @classmethod
    def horizontal(cls, x2: float, x1_range: Tuple[float, float]) -> 'ZSegment':
        return cls(start=(x1_range[0], x2), end=(x1_range[1], x2))


class ZCurve(BaseModel):
    """曲線の軌跡（パラメータ範囲付き）"""

    kind: Literal["curve"] = "curve"
    curve: PlaneCurve
    param_range: Tuple[float, float]


ZComponent = Annotated[Union[ZPoint, ZSegment, ZCurve], Field(discriminator="kind")]


class ZSpec(BaseModel):
    """非解析集合の平面像"""

    components: List[ZComponent] = Field(default_factory=list, description="成分")
    provenance: str = Field("", description="どの関数の非解析性に由来するか")
    complement_dense: bool = Field(True, description="補集合が稠密であるという前提（記録のみ）")

    @property
    def is_empty(self) -> bool:
        return not self.components


class ZImagePoint(BaseModel):
    """グラフ上の孤立像"""

    node: Optional[str] = Field(None, description="節点上にある場合の節点ID")
    edge: Optional[str] = Field(None, description="辺内部にある場合の辺ID")
    height: float = Field(..., description="高さ")
    x2: float = Field(..., description="元の点の x2")


class ZImageArc(BaseModel):
    """正の長さを持つ像"""

    edge: str = Field(..., description="辺ID")
    heights: Tuple[float, float] = Field(..., description="高さ範囲")


class ZImage(BaseModel):
    """q_c(Z)"""

    points: List[ZImagePoint] = Field(default_factory=list)
    arcs: List[ZImageArc] = Field(default_factory=list)

    @property
    def is_empty(self) -> bool:
        return not self.points and not self.arcs


class ZGraphVerdict(BaseModel):
    """(R_c,Z)-グラフの判定"""

    defined: bool = Field(..., description="定義されるか")
    reason: Optional[Literal[
        "arc-in-image", "uncovered-endpoint", "uncovered-branch", "loop-cell", "vertexless-cycle"
    ]] = Field(None, description="未定義の理由")
    refined: Optional[ReebGraph] = Field(None, description="頂点集合を q_c(Z) とした再構成グラフ")
    vertices: List[str] = Field(default_factory=list, description="頂点ID")
    classical_vertex_count: int = Field(0, description="古典的臨界節点の数")
    added_vertex_count: int = Field(0, description="古典的臨界節点に重ならない Z 頂点の数")
    raw_z_vertex_count: int = Field(0, description="重複除去前の Z 頂点の数")

    def to_json_dict(self) -> Dict[str, Any]:
        return {
            "zgraph": "defined" if self.defined else "undefined",
            "reason": self.reason,
            "vertices": self.vertices,
            "classical_vertex_count": self.classical_vertex_count,
            "added_vertex_count": self.added_vertex_count,
            "raw_z_vertex_count": self.raw_z_vertex_count,
        }


class VertexSet(BaseModel):
    """Remark-1 型の頂点集合"""

    critical_nodes: List[str] = Field(default_factory=list, description="臨界等高線の節点")
    z_points: List[ZImagePoint] = Field(default_factory=list, description="Z と交わる等高線")
    non_discrete_warning: bool = Field(False, description="Z の像に弧があり頂点集合が離散でない")

    @property
    def size(self) -> int:
        extra = [p for p in self.z_points if p.node is None or p.node not in self.critical_nodes]
        return len(self.critical_nodes) + len(extra)
