"""
共通データモデル - reebscape

関数族・曲線・領域・Reeb グラフ・Z 構造・懸垂写像・シナリオの
データ構造を定義します。数値処理は backend/src/services 側にあります。
"""

from .functions import (
    Fn1D, PolynomialFn, SDCRAnFn, TrigTerm, CompositionFn, ExampleOneFn,
    PiecewiseBlendFn, BlendPiece, FnClassification, FlatnessReport, Tangency,
)
from .curves import (
    PlaneCurve, ParabolaChain, Circle, FnGraph, Transformed, Constraint,
    Window, PlanarRegion, Slice, SliceInterval, BoundaryEvent,
)
from .reeb import (
    ReebGraph, ReebNode, ReebEdge, TrackSample, GraphFlavor, NodeKind,
    NotAGraphEvidence, WitnessLevel, PropernessReport,
)
from .zgraph import (
    ZSpec, ZPoint, ZSegment, ZCurve, ZImage, ZImagePoint, ZImageArc,
    ZGraphVerdict, VertexSet,
)
from .lift import SuspensionMap, RankResult, RankReport, CriticalCountReport
from .scenario import (
    Scenario, ScenarioName, ScenarioParameters, CheckName, CheckResult, RunReport,
)

__all__ = [
    "Fn1D",
    "PolynomialFn",
    "SDCRAnFn",
    "TrigTerm",
    "CompositionFn",
    "ExampleOneFn",
    "PiecewiseBlendFn",
    "BlendPiece",
    "FnClassification",
    "FlatnessReport",
    "Tangency",
    "PlaneCurve",
    "ParabolaChain",
    "Circle",
    "FnGraph",
    "Transformed",
    "Constraint",
    "Window",
    "PlanarRegion",
    "Slice",
    "SliceInterval",
    "BoundaryEvent",
    "ReebGraph",
    "ReebNode",
    "ReebEdge",
    "TrackSample",
    "GraphFlavor",
    "NodeKind",
    "NotAGraphEvidence",
    "WitnessLevel",
    "PropernessReport",
    "ZSpec",
    "ZPoint",
    "ZSegment",
    "ZCurve",
    "ZImage",
    "ZImagePoint",
    "ZImageArc",
    "ZGraphVerdict",
    "VertexSet",
    "SuspensionMap",
    "RankResult",
    "RankReport",
    "CriticalCountReport",
    "Scenario",
    "ScenarioName",
    "ScenarioParameters",
    "CheckName",
    "CheckResult",
    "RunReport",
]
