"""
Reeb グラフ構築サービス

高さ関数 x1 の事象駆動スイープ、周期商グラフ、臨界値集積の検出、
固有性検査、ラスタ化による独立オラクルを提供する。
"""

import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union, Dict, Set

import numpy as np
import mpmath
import networkx as nx

from shared.models.curves import PlanarRegion, Window, Slice, SliceInterval, BoundaryEvent, FnGraph
from shared.models.reeb import (
    ReebGraph, ReebNode, ReebEdge, TrackSample, GraphFlavor, NodeKind,
    NotAGraphEvidence, WitnessLevel, PropernessReport,
)

from .regions import region_service, RegionService
from ..config.settings import get_sweep_config, get_numerics_config
from ..core.errors import (
    ReebscapeError, ReebscapeErrors, AccumulationSuspected, Inconclusive,
)
from ..core.logging import get_logger, LogCategory


logger = get_logger(__name__, LogCategory.SWEEP)

SweepResult = Union[ReebGraph, NotAGraphEvidence]


@dataclass
class _OpenEdge:
    """スイープ中でまだ上端が決まっていない辺"""
    lo: str
    start: float
    track: List[TrackSample] = field(default_factory=list)


def _proper(s: Slice) -> List[SliceInterval]:
    return s.proper_intervals


def _same_height(a, b) -> bool:
    return abs(a - b) <= 1e-14 * max(abs(a), abs(b))


class ReebSweepService:
    """Reeb グラフ構築サービス"""

    def __init__(self, regions: Optional[RegionService] = None):
        self.regions = regions or region_service
        self.kit = self.regions.kit
        self.config = get_sweep_config()
        self.numerics = get_numerics_config()

    # --- スライス補助 -------------------------------------------------

    def _slice(self, region: PlanarRegion, height: float) -> List[SliceInterval]:
        lo, hi = region.window.x1
        if height < lo or height > hi:
            return []
        return _proper(self.regions.slice(region, height))

    # --- 構築 ---------------------------------------------------------

    def build_reeb(
        self,
        region: PlanarRegion,
        window: Optional[Window] = None,
        periodic: Optional[bool] = None,
        tol: Optional[float] = None,
        max_refine: Optional[int] = None,
        track_samples: Optional[int] = None,
    ) -> SweepResult:
        """x1 の Reeb グラフ（集積を検出した場合は非グラフ証拠）"""
        start = time.time()
        if window is not None:
            region = region.model_copy(update={"window": window})
        periodic = region.is_periodic if periodic is None else periodic
        max_refine = self.config.max_refine if max_refine is None else max_refine
        samples = track_samples or self.config.track_samples

        if periodic:
            if region.period is None:
                raise ValueError("periodic mode requires a declared period")
            result: SweepResult = self._build_periodic(region, tol, max_refine, samples)
        else:
            try:
                events = self.regions.boundary_events(region, tol)
            except AccumulationSuspected as exc:
                evidence = self.detect_accumulation(region, exc.focus)
                if evidence is None:
                    raise
                logger.numeric_operation(
                    "build_reeb",
                    duration_ms=(time.time() - start) * 1000,
                    region=region.name,
                    verdict="not-a-graph",
                    witnesses=evidence.witness_count,
                )
                return evidence
            result = self._sweep(region, events, max_refine, samples)

        logger.numeric_operation(
            "build_reeb",
            duration_ms=(time.time() - start) * 1000,
            region=region.name,
            flavor=result.flavor.kind,
            nodes=len(result.nodes),
            edges=len(result.edges),
        )
        return result

    def _sweep(self, region: PlanarRegion, events: List[BoundaryEvent], max_refine: int, samples: int) -> ReebGraph:
        events = sorted(events, key=lambda e: e.height)
        for _ in range(max_refine + 1):
            detected: List[float] = []
            graph = self._assemble(region, events, samples, max_refine, detected)
            if graph is not None:
                return graph
            logger.warning("Interval count changed inside a band", region=region.name, heights=detected)
            events = sorted(
                events + [BoundaryEvent(height=h, tag="detected") for h in detected],
                key=lambda e: e.height,
            )
        span = (events[0].height, events[-1].height) if events else (0.0, 0.0)
        raise ReebscapeErrors.refinement_exceeded(span, max_refine)

    def _deltas(self, region: PlanarRegion, heights: List[float]) -> List[float]:
        lo_w, hi_w = region.window.x1
        out = []
        for k, h in enumerate(heights):
            gaps = [self.config.event_delta_cap * 4]
            if k > 0:
                gaps.append(h - heights[k - 1])
            if k + 1 < len(heights):
                gaps.append(heights[k + 1] - h)
            gaps.extend(g for g in (h - lo_w, hi_w - h) if g > 0)
            out.append(min(g / 4.0 for g in gaps))
        return out

    def _band(
        self, region: PlanarRegion, h0: float, h1: float, samples: int, max_refine: int
    ) -> Tuple[List[List[SliceInterval]], Optional[float]]:
        """帯 [h0, h1] のトラック標本（区間数が変わればその高さを返す）"""
        heights = list(np.linspace(h0, h1, samples))
        slices = [self._slice(region, h) for h in heights]
        counts = [len(s) for s in slices]
        for k in range(len(counts) - 1):
            if counts[k] != counts[k + 1]:
                return slices, self._locate_change(region, heights[k], heights[k + 1], counts[k])

        for _ in range(max_refine):
            bad = [
                k for k in range(len(slices) - 1)
                if not all(a.overlaps(b) for a, b in zip(slices[k], slices[k + 1]))
            ]
            if not bad:
                return self._with_heights(heights, slices), None
            for k in reversed(bad):
                mid = 0.5 * (heights[k] + heights[k + 1])
                mid_slice = self._slice(region, mid)
                if len(mid_slice) != counts[0]:
                    return slices, self._locate_change(region, heights[k], mid, counts[0])
                heights.insert(k + 1, mid)
                slices.insert(k + 1, mid_slice)
        raise ReebscapeErrors.refinement_exceeded((h0, h1), max_refine)

    @staticmethod
    def _with_heights(heights: List[float], slices: List[List[SliceInterval]]):
        return [(h, s) for h, s in zip(heights, slices)]

    def _locate_change(self, region: PlanarRegion, lo: float, hi: float, count_lo: int) -> float:
        """区間数が変わる高さを二分法で特定"""
        for _ in range(80):
            if hi - lo <= self.numerics.event_dedup_tol:
                break
            mid = 0.5 * (lo + hi)
            if len(self._slice(region, mid)) == count_lo:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    @staticmethod
    def _components(below: List[SliceInterval], above: List[SliceInterval]) -> List[Tuple[List[int], List[int]]]:
        """事象の上下の区間を重なりで結んだ連結成分"""
        g = nx.Graph()
        g.add_nodes_from(("b", i) for i in range(len(below)))
        g.add_nodes_from(("a", j) for j in range(len(above)))
        for i, b in enumerate(below):
            for j, a in enumerate(above):
                if b.overlaps(a):
                    g.add_edge(("b", i), ("a", j))
        comps = []
        for comp in nx.connected_components(g):
            bi = sorted(i for side, i in comp if side == "b")
            ai = sorted(j for side, j in comp if side == "a")
            comps.append((bi, ai))

        def left(c):
            ivs = [below[i] for i in c[0]] + [above[j] for j in c[1]]
            return min(iv.lo for iv in ivs)

        return sorted(comps, key=left)

    def _classify(
        self, nb: int, na: int, event: BoundaryEvent, lo: float, hi: float, window: Window
    ) -> Tuple[Optional[NodeKind], Optional[str], Optional[float]]:
        slack = 1e-6 * max(1.0, hi - lo)
        witnesses = [w for w in event.witnesses if lo - slack <= w <= hi + slack]
        witness = witnesses[0] if witnesses else None
        if nb == 0:
            return (NodeKind.END, "lower", witness) if event.tag == "end" else (NodeKind.BIRTH, None, witness)
        if na == 0:
            return (NodeKind.END, "upper", witness) if event.tag == "end" else (NodeKind.DEATH, None, witness)
        if (nb, na) == (1, 2):
            return NodeKind.SPLIT, None, witness
        if (nb, na) == (2, 1):
            return NodeKind.MERGE, None, witness
        if nb == na == 1:
            eps = self.numerics.event_dedup_tol * max(1.0, abs(window.x2[0]), abs(window.x2[1]))
            inside = [w for w in witnesses if window.x2[0] + eps < w < window.x2[1] - eps]
            if not inside:
                return None, None, None
            kind = NodeKind.CORNER if event.tag == "corner" else NodeKind.TANGENCY_DEGENERATE
            return kind, None, inside[0]
        return NodeKind.TANGENCY_DEGENERATE, None, witness

    def _assemble(
        self,
        region: PlanarRegion,
        events: List[BoundaryEvent],
        samples: int,
        max_refine: int,
        detected: List[float],
    ) -> Optional[ReebGraph]:
        heights = [e.height for e in events]
        deltas = self._deltas(region, heights)
        nodes: List[ReebNode] = []
        edges: List[ReebEdge] = []
        regular: List[float] = []
        degenerate: Dict[str, List[float]] = {}
        open_edges: List[_OpenEdge] = []

        for k, event in enumerate(events):
            h, d = event.height, deltas[k]
            if k == 0:
                below = self._slice(region, h - d)
                open_edges = []
                for iv in below:
                    node = ReebNode(id=f"n{len(nodes)}", height=region.window.x1[0], kind=NodeKind.END,
                                    x2=iv.midpoint, end_side="lower")
                    nodes.append(node)
                    open_edges.append(_OpenEdge(lo=node.id, start=node.height))
            else:
                band, change = self._band(region, heights[k - 1] + deltas[k - 1], h - d, samples, max_refine)
                if change is not None:
                    detected.append(change)
                    return None
                for band_h, intervals in band:
                    for edge, iv in zip(open_edges, intervals):
                        edge.track.append(TrackSample(height=band_h, lo=iv.lo, hi=iv.hi, truncated=iv.truncated))
                below = band[-1][1] if band else self._slice(region, h - d)
            above = self._slice(region, h + d)

            at_level = self.regions.slice(region, h).degenerate_points
            if at_level:
                degenerate[repr(h)] = at_level

            next_edges: List[Optional[_OpenEdge]] = [None] * len(above)
            made_node = False
            for bi, ai in self._components(below, above):
                ivs = [below[i] for i in bi] + [above[j] for j in ai]
                lo, hi = min(iv.lo for iv in ivs), max(iv.hi for iv in ivs)
                kind, end_side, witness = self._classify(len(bi), len(ai), event, lo, hi, region.window)
                if kind is None:
                    next_edges[ai[0]] = open_edges[bi[0]]
                    continue
                node = ReebNode(
                    id=f"n{len(nodes)}", height=h, kind=kind,
                    x2=witness if witness is not None else 0.5 * (lo + hi), end_side=end_side,
                )
                nodes.append(node)
                made_node = True
                for i in bi:
                    edges.append(self._close(open_edges[i], node, len(edges)))
                for j in ai:
                    next_edges[j] = _OpenEdge(lo=node.id, start=h)
            if not made_node:
                regular.append(h)
            open_edges = [e for e in next_edges if e is not None]

        for edge in open_edges:
            node = ReebNode(id=f"n{len(nodes)}", height=region.window.x1[1], kind=NodeKind.END,
                            x2=edge.track[-1].lo if edge.track else 0.0, end_side="upper")
            nodes.append(node)
            edges.append(self._close(edge, node, len(edges)))

        truncated = any(e.truncated for e in edges)
        flavor = GraphFlavor(kind="truncated", window=region.window.x2) if truncated else GraphFlavor(kind="finite")
        return ReebGraph(nodes=nodes, edges=edges, flavor=flavor, regular_events=regular, degenerate_levels=degenerate)

    @staticmethod
    def _close(edge: _OpenEdge, node: ReebNode, index: int) -> ReebEdge:
        return ReebEdge(id=f"e{index}", lo=edge.lo, hi=node.id, heights=(edge.start, node.height), track=edge.track)

    # --- 周期モード ---------------------------------------------------

    def _build_periodic(self, region: PlanarRegion, tol, max_refine: int, samples: int) -> ReebGraph:
        """一周期と両側の継ぎ目を掃いて商グラフを作る"""
        period = region.period
        mid = 0.5 * (region.window.x2[0] + region.window.x2[1])
        base = mid - period / 2.0
        extended = region.model_copy(update={
            "window": Window(x1=region.window.x1, x2=(base - period, base + 2.0 * period)),
            "period": None,
        })
        events = self.regions.boundary_events(extended, tol)
        full = self._sweep(extended, events, max_refine, samples)

        def cls(node: ReebNode) -> int:
            return math.floor((node.x2 - base) / period + 1e-7)

        home = [n for n in full.nodes if cls(n) == 0]

        def representative(node: ReebNode) -> Optional[str]:
            k = cls(node)
            for cand in home:
                if (cand.kind == node.kind and abs(cand.height - node.height) <= 1e-9
                        and abs(node.x2 - k * period - cand.x2) <= 1e-6 * max(1.0, period)):
                    return cand.id
            return None

        by_id = {n.id: n for n in full.nodes}
        edges: List[ReebEdge] = []
        for e in full.edges:
            lo = by_id[e.lo]
            if cls(lo) != 0:
                continue
            hi = by_id[e.hi]
            target = hi.id if cls(hi) == 0 else representative(hi)
            if target is None:
                logger.warning("Seam node without a home-period match", node=hi.id, x2=hi.x2)
                continue
            edges.append(e.model_copy(update={"id": f"e{len(edges)}", "hi": target, "shift": cls(hi)}))

        return ReebGraph(
            nodes=home,
            edges=edges,
            flavor=GraphFlavor(kind="periodic", period=period, window=(base, base + period)),
            regular_events=full.regular_events,
        )

    # --- 集積 ---------------------------------------------------------

    def _gap_curve(self, region: PlanarRegion, focus: Tuple[float, float]):
        for constraint in region.constraints:
            for param, g1, g2 in self.kit.geometry.gap_points(constraint.curve):
                if math.hypot(g1 - focus[0], g2 - focus[1]) <= 1e-6:
                    return constraint.curve, param
        return None

    def _mp_height(self, curve, param: float):
        geometry = self.kit.geometry
        base, A, b = geometry.flatten(curve)
        if not isinstance(base, FnGraph):
            return mpmath.mpf(float(geometry.point(curve, param)[0]))
        with mpmath.workdps(60):
            fx = self.kit.eval_mp(base.f, param)
            return A[0, 0] * fx + A[0, 1] * mpmath.mpf(param) + b[0]

    def detect_accumulation(
        self,
        region: PlanarRegion,
        focus: Tuple[float, float],
        delta0: float = 1.0 / math.pi,
        levels: Optional[int] = None,
        min_count: Optional[int] = None,
    ) -> Optional[NotAGraphEvidence]:
        """焦点へ 2 倍ずつ近づく窓で新しい臨界高さが現れ続けるか"""
        start = time.time()
        levels = levels or self.config.accumulation_levels
        min_count = min_count or self.config.accumulation_min_count
        source = self._gap_curve(region, focus)
        if source is None:
            logger.info("No analyticity gap at focus", region=region.name, focus=list(focus))
            return None
        curve, gap = source
        acc = mpmath.mpf(focus[0])
        seen: List = []
        maxima: List[Tuple[float, object, float]] = []
        schedule: List[WitnessLevel] = []

        for k in range(levels):
            outer = delta0 * 2.0 ** (-k)
            inner = delta0 * 2.0 ** (-k - 1)
            pad = 1e-6 * inner
            found = []
            for lo, hi in ((gap + inner - pad, gap + outer + pad), (gap - outer - pad, gap - inner + pad)):
                found.extend(self.kit.vertical_tangents(curve, (lo, hi)))
            found = [t for t in found if self.regions.contains(region, (t.x1, t.x2), tol=1e-7)]
            heights = [self._mp_height(curve, t.param) for t in found]
            peak = max((abs(h - acc) for h in heights), default=mpmath.mpf(0))

            new = 0
            for t, h in zip(found, heights):
                if t.kind == "min" and abs(h - acc) <= 1e-10 * peak:
                    h = acc
                if not any(_same_height(h, s) for s in seen):
                    seen.append(h)
                    new += 1
                if t.kind == "max" and h != acc:
                    maxima.append((t.param, h, t.x1))
            schedule.append(WitnessLevel(level=k, param_range=(inner, outer), new_heights=new,
                                         contour_multiplicity=len(found)))
            if new < min_count:
                logger.info("Accumulation criterion failed", region=region.name, level=k, new_heights=new)
                return None

        unique: List[Tuple[float, object, float]] = []
        for item in sorted(maxima, key=lambda m: abs(m[1] - acc), reverse=True):
            if not any(_same_height(item[1], u[1]) for u in unique):
                unique.append(item)

        try:
            degenerate = self.regions.slice(region, focus[0]).degenerate_points
        except ReebscapeError:
            degenerate = []

        evidence = NotAGraphEvidence(
            accumulation_height=float(focus[0]),
            focus=(float(focus[0]), float(focus[1])),
            heights=[float(u[1]) for u in unique],
            log_heights=[float(mpmath.log(abs(u[1] - acc))) for u in unique],
            params=[u[0] for u in unique],
            levels=schedule,
            degenerate_points=degenerate,
        )
        logger.numeric_operation(
            "detect_accumulation",
            duration_ms=(time.time() - start) * 1000,
            region=region.name,
            witnesses=evidence.witness_count,
            monotone=evidence.strictly_monotone,
        )
        return evidence

    # --- 固有性 -------------------------------------------------------

    def properness_check(self, graph: ReebGraph, region: Optional[PlanarRegion] = None) -> PropernessReport:
        """等高線区間が一様に有界か"""
        samples = [(e, s) for e in graph.edges for s in e.track]
        bound = max((s.hi - s.lo for _, s in samples), default=0.0)
        clipped = [(e, s) for e, s in samples if s.truncated]

        if not clipped:
            report = PropernessReport(proper=True, bound=bound)
            logger.check_result("properness", True, bound=bound, flavor=graph.flavor.kind)
            return report
        if region is None:
            raise Inconclusive("tracks are clipped by the window and no region was given to re-slice")

        widened = region.model_copy(update={"window": region.window.widened_x2(2.0)})
        for edge, sample in clipped:
            for iv in self.regions.slice(widened, sample.height).proper_intervals:
                if iv.truncated and iv.lo <= sample.hi and sample.lo <= iv.hi:
                    direction = "-" if iv.lo_truncated else "+"
                    logger.check_result("properness", False, edge=edge.id, direction=direction)
                    return PropernessReport(proper=False, offending_edge=edge.id, direction=direction)
        raise Inconclusive(
            "tracks clipped by the window become bounded after widening",
            details={"edges": sorted({e.id for e, _ in clipped})},
        )

    # --- ラスタオラクル -----------------------------------------------

    def brute_force_reeb(self, region: PlanarRegion, grid: Tuple[int, int] = (256, 256)) -> ReebGraph:
        """格子上の所属判定から行ごとの連結成分をつないだ近似 Reeb グラフ"""
        start = time.time()
        nx1, nx2 = grid
        if min(grid) < 64:
            raise ValueError("grid must be at least 64x64")
        w = region.window
        x1s = np.linspace(w.x1[0], w.x1[1], nx1)
        x2s = np.linspace(w.x2[0], w.x2[1], nx2)
        X1, X2 = np.meshgrid(x1s, x2s, indexing="ij")
        member = np.ones(X1.shape, dtype=bool)
        for c in region.constraints:
            g = np.asarray(self.regions.constraint_value(c, X1.ravel(), X2.ravel()), dtype=float)
            member &= np.broadcast_to(g, X1.ravel().shape).reshape(X1.shape) >= 0.0

        runs: List[List[Tuple[int, int]]] = []
        for row in member:
            d = np.diff(np.concatenate(([0], row.astype(int), [0])))
            starts = np.nonzero(d == 1)[0]
            ends = np.nonzero(d == -1)[0] - 1
            runs.append(list(zip(starts.tolist(), ends.tolist())))

        g = nx.DiGraph()
        for i, row_runs in enumerate(runs):
            for r, run in enumerate(row_runs):
                g.add_node((i, r), run=run)
        for i in range(nx1 - 1):
            for r, (a0, a1) in enumerate(runs[i]):
                for s, (b0, b1) in enumerate(runs[i + 1]):
                    if a0 <= b1 and b0 <= a1:
                        g.add_edge((i, r), (i + 1, s))

        def is_critical(v) -> bool:
            return not (g.in_degree(v) == 1 and g.out_degree(v) == 1)

        def touches(v) -> bool:
            a0, a1 = g.nodes[v]["run"]
            return a0 == 0 or a1 == nx2 - 1

        node_ids: Dict[Tuple[int, int], str] = {}
        nodes: List[ReebNode] = []
        for v in sorted(g.nodes):
            if not is_critical(v):
                continue
            down, up = g.in_degree(v), g.out_degree(v)
            if down == 0 and up == 0:
                continue
            i = v[0]
            end_side = None
            if down == 0:
                kind = NodeKind.END if i == 0 else NodeKind.BIRTH
                end_side = "lower" if i == 0 else None
            elif up == 0:
                kind = NodeKind.END if i == nx1 - 1 else NodeKind.DEATH
                end_side = "upper" if i == nx1 - 1 else None
            elif (down, up) == (1, 2):
                kind = NodeKind.SPLIT
            elif (down, up) == (2, 1):
                kind = NodeKind.MERGE
            else:
                kind = NodeKind.TANGENCY_DEGENERATE
            a0, a1 = g.nodes[v]["run"]
            node_ids[v] = f"b{len(nodes)}"
            nodes.append(ReebNode(id=node_ids[v], height=float(x1s[i]), kind=kind,
                                  x2=float(0.5 * (x2s[a0] + x2s[a1])), end_side=end_side))

        edges: List[ReebEdge] = []
        for v in sorted(node_ids):
            for nxt in sorted(g.successors(v)):
                chain = [v]
                cur = nxt
                while not is_critical(cur):
                    chain.append(cur)
                    cur = next(iter(g.successors(cur)))
                chain.append(cur)
                track = []
                for u in chain:
                    a0, a1 = g.nodes[u]["run"]
                    track.append(TrackSample(height=float(x1s[u[0]]), lo=float(x2s[a0]), hi=float(x2s[a1]),
                                             truncated=touches(u)))
                edges.append(ReebEdge(id=f"be{len(edges)}", lo=node_ids[v], hi=node_ids[cur],
                                      heights=(float(x1s[v[0]]), float(x1s[cur[0]])), track=track))

        truncated = any(e.truncated for e in edges)
        flavor = GraphFlavor(kind="truncated", window=w.x2) if truncated else GraphFlavor(kind="finite")
        graph = ReebGraph(nodes=nodes, edges=edges, flavor=flavor)
        logger.numeric_operation(
            "brute_force_reeb",
            duration_ms=(time.time() - start) * 1000,
            region=region.name,
            grid=list(grid),
            nodes=len(nodes),
            edges=len(edges),
        )
        return graph

    # --- 後処理 -------------------------------------------------------

    def prune_window_artifacts(self, graph: ReebGraph) -> ReebGraph:
        """窓で切断された辺と孤立節点を除き、通過節点を縮約する"""
        edges = [e for e in graph.edges if not e.truncated]
        used: Set[str] = {e.lo for e in edges} | {e.hi for e in edges}
        nodes = [n for n in graph.nodes if n.id in used]
        flavor = graph.flavor if graph.is_periodic else GraphFlavor(kind="finite")
        pruned = graph.model_copy(update={"nodes": nodes, "edges": edges, "flavor": flavor})
        return self.contract_regular_nodes(pruned)

    @staticmethod
    def contract_regular_nodes(graph: ReebGraph) -> ReebGraph:
        """役割 (1,1) の節点を消して前後の辺をつなぐ"""
        nodes = list(graph.nodes)
        edges = list(graph.edges)
        changed = True
        while changed:
            changed = False
            for node in nodes:
                incoming = [e for e in edges if e.hi == node.id]
                outgoing = [e for e in edges if e.lo == node.id]
                if len(incoming) != 1 or len(outgoing) != 1 or incoming[0].id == outgoing[0].id:
                    continue
                a, b = incoming[0], outgoing[0]
                merged = ReebEdge(
                    id=a.id, lo=a.lo, hi=b.hi, heights=(a.heights[0], b.heights[1]),
                    track=a.track + b.track, shift=a.shift + b.shift,
                )
                edges = [merged if e.id == a.id else e for e in edges if e.id != b.id]
                nodes = [n for n in nodes if n.id != node.id]
                changed = True
                break
        return graph.model_copy(update={"nodes": nodes, "edges": edges})


# グローバルサービスインスタンス
reeb_sweep_service = ReebSweepService()
