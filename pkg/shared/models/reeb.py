"""
Reeb グラフと非グラフ証拠のデータモデル
"""

from typing import List, Literal, Optional, Dict, Any, Tuple
from enum import Enum
from pydantic import BaseModel, Field


class NodeKind(str, Enum):
    """節点の種別"""
    SPLIT = "split"                          # 1 → 2
    MERGE = "merge"                          # 2 → 1
    BIRTH = "birth"                          # 0 → 1
    DEATH = "death"                          # 1 → 0
    CORNER = "corner"                        # 1 → 1（角）
    END = "end"                              # 帯・窓の端
    TANGENCY_DEGENERATE = "tangency-degenerate"
    Z_VERTEX = "z-vertex"


CRITICAL_KINDS = {
    NodeKind.SPLIT, NodeKind.MERGE, NodeKind.BIRTH, NodeKind.DEATH,
    NodeKind.TANGENCY_DEGENERATE,
}


class ReebNode(BaseModel):
    """臨界等高線に対応する節点"""

    id: str = Field(..., description="節点ID")
    height: float = Field(..., description="高さ")
    kind: NodeKind = Field(..., description="種別")
    x2: float = Field(..., description="証拠となる x2 位置")
    end_side: Optional[Literal["lower", "upper"]] = Field(None, description="end 節点の向き")


class TrackSample(BaseModel):
    """辺のトラック標本"""

    height: float = Field(..., description="高さ")
    lo: float = Field(..., description="区間下端")
    hi: float = Field(..., description="区間上端")
    truncated: bool = Field(False, description="窓で切断されたか")


class ReebEdge(BaseModel):
    """正則等高線の族に対応する辺"""

    id: str = Field(..., description="辺ID")
    lo: str = Field(..., description="下側節点ID")
    hi: str = Field(..., description="上側節点ID")
    heights: Tuple[float, float] = Field(..., description="高さ範囲")
    track: List[TrackSample] = Field(default_factory=list, description="x2 区間のトラック")
    shift: int = Field(0, description="周期商グラフでの継ぎ目シフト")

    @property
    def truncated(self) -> bool:
        return any(s.truncated for s in self.track)

    @property
    def length(self) -> float:
        return self.heights[1] - self.heights[0]

    def interval_at(self, height: float) -> Optional[Tuple[float, float]]:
        """トラックを線形補間して height での区間を返す"""
        if not self.track:
            return None
        samples = sorted(self.track, key=lambda s: s.height)
        if height < samples[0].height or height > samples[-1].height:
            return None
        for a, b in zip(samples, samples[1:]):
            if a.height <= height <= b.height:
                span = b.height - a.height
                w = 0.0 if span == 0 else (height - a.height) / span
                return (a.lo + w * (b.lo - a.lo), a.hi + w * (b.hi - a.hi))
        s = samples[-1]
        return (s.lo, s.hi)


class GraphFlavor(BaseModel):
    """グラフの種類"""

    kind: Literal["finite", "periodic", "truncated"] = Field(..., description="有限・周期・切断")
    period: Optional[float] = Field(None, description="周期")
    window: Optional[Tuple[float, float]] = Field(None, description="x2 窓")


class ReebGraph(BaseModel):
    """高さ関数 x1 の Reeb グラフ"""

    nodes: List[ReebNode] = Field(default_factory=list, description="節点")
    edges: List[ReebEdge] = Field(default_factory=list, description="辺")
    flavor: GraphFlavor = Field(..., description="種類")
    end_reading: Literal["closed", "open"] = Field("closed", description="帯の端の読み方")
    regular_events: List[float] = Field(default_factory=list, description="節点を作らなかった事象高さ")
    degenerate_levels: Dict[str, List[float]] = Field(
        default_factory=dict, description="退化点区間（高さ → x2 の列）"
    )

    @property
    def is_periodic(self) -> bool:
        return self.flavor.kind == "periodic"

    def node(self, node_id: str) -> ReebNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def degree(self, node_id: str) -> int:
        return sum((e.lo == node_id) + (e.hi == node_id) for e in self.edges)

    def role(self, node_id: str) -> Tuple[int, int]:
        """(下から入る辺の数, 上へ出る辺の数)"""
        below = sum(1 for e in self.edges if e.hi == node_id)
        above = sum(1 for e in self.edges if e.lo == node_id)
        return below, above

    def nodes_of_kind(self, *kinds: NodeKind) -> List[ReebNode]:
        return [n for n in self.nodes if n.kind in kinds]

    def to_json_dict(self) -> Dict[str, Any]:
        """graph.json の形式"""
        flavor: Any = self.flavor.kind
        if self.flavor.kind == "periodic":
            flavor = {"periodic": self.flavor.period}
        elif self.flavor.kind == "truncated":
            flavor = {"truncated": list(self.flavor.window or ())}
        return {
            "flavor": flavor,
            "end_reading": self.end_reading,
            "nodes": [
                {"id": n.id, "height": n.height, "kind": n.kind.value, "x2": n.x2}
                for n in self.nodes
            ],
            "edges": [
                {"id": e.id, "lo": e.lo, "hi": e.hi, "heights": list(e.heights), "shift": e.shift}
                for e in self.edges
            ],
        }

    @classmethod
    def from_json_dict(cls, data: Dict[str, Any]) -> 'ReebGraph':
        """graph.json から復元（トラックは含まれない）"""
        raw = data["flavor"]
        if isinstance(raw, dict) and "periodic" in raw:
            flavor = GraphFlavor(kind="periodic", period=raw["periodic"])
        elif isinstance(raw, dict) and "truncated" in raw:
            flavor = GraphFlavor(kind="truncated", window=tuple(raw["truncated"]))
        else:
            flavor = GraphFlavor(kind=raw)
        return cls(
            flavor=flavor,
            end_reading=data.get("end_reading", "closed"),
            nodes=[ReebNode(**n) for n in data["nodes"]],
            edges=[
                ReebEdge(id=e["id"], lo=e["lo"], hi=e["hi"], heights=tuple(e["heights"]), shift=e.get("shift", 0))
                for e in data["edges"]
            ],
        )


class WitnessLevel(BaseModel):
    """集積スケジュールの一段"""

    level: int = Field(..., description="段 k")
    param_range: Tuple[float, float] = Field(..., description="焦点からの距離範囲")
    new_heights: int = Field(..., description="この段で新たに現れた高さの数")
    contour_multiplicity: int = Field(..., description="この段の臨界点数")


class NotAGraphEvidence(BaseModel):
    """臨界値の集積による非グラフ証拠"""

    accumulation_height: float = Field(..., description="集積高さ")
    focus: Tuple[float, float] = Field(..., description="焦点 (x1, x2)")
    heights: List[float] = Field(..., description="証拠高さ列（倍精度、下位桁はアンダーフローで 0 になり得る）")
    log_heights: List[float] = Field(..., description="|高さ - 集積高さ| の自然対数")
    params: List[float] = Field(default_factory=list, description="各証拠点の曲線パラメータ")
    levels: List[WitnessLevel] = Field(default_factory=list, description="段ごとの集計")
    degenerate_points: List[float] = Field(default_factory=list, description="集積高さでの退化点 x2")

    @property
    def witness_count(self) -> int:
        return len(self.log_heights)

    @property
    def strictly_monotone(self) -> bool:
        return all(b < a for a, b in zip(self.log_heights, self.log_heights[1:]))

    def to_json_dict(self) -> Dict[str, Any]:
        """evidence.json の形式"""
        return {
            "verdict": "not-a-graph",
            "accumulation_height": self.accumulation_height,
            "focus": list(self.focus),
            "witness": [
                {"height": h, "log_distance": lh, "param": p}
                for h, lh, p in zip(self.heights, self.log_heights, self.params or [None] * len(self.heights))
            ],
            "levels": [lv.model_dump() for lv in self.levels],
            "degenerate_points": self.degenerate_points,
        }


class PropernessReport(BaseModel):
    """固有性検査の結果"""

    proper: bool = Field(..., description="固有か")
    bound: Optional[float] = Field(None, description="等高線区間長の一様上界")
    offending_edge: Optional[str] = Field(None, description="非有界な辺")
    direction: Optional[Literal["-", "+"]] = Field(None, description="非有界方向")
