"""
Z 構造サービス

非解析集合 Z の Reeb グラフへの像、(R_c,Z)-グラフの判定、
Remark-1 型の頂点規則、グラフ同型判定を提供する。
"""

import time
from collections import Counter, deque
from typing import Dict, List, Optional, Tuple

import networkx as nx
import numpy as np

from shared.models.curves import PlanarRegion, SliceInterval
from shared.models.reeb import ReebGraph, ReebNode, ReebEdge, NodeKind, CRITICAL_KINDS
from shared.models.zgraph import (
    ZSpec, ZPoint, ZSegment, ZImage, ZImagePoint, ZImageArc, ZGraphVerdict, VertexSet,
)

from .regions import region_service, RegionService
from ..config.settings import get_sweep_config
from ..core.errors import LocateFailed, ReebscapeErrors, SizeMismatch
from ..core.logging import get_logger, LogCategory


logger = get_logger(__name__, LogCategory.ZSTRUCT)

SEGMENT_SAMPLES = 64
HEIGHT_TOL = 1e-6


def classical_vertices(graph: ReebGraph) -> List[str]:
    """臨界等高線の節点（閉じた帯の読みでは end も含む）"""
    kinds = set(CRITICAL_KINDS)
    if graph.end_reading == "closed":
        kinds.add(NodeKind.END)
    return [n.id for n in graph.nodes if n.kind in kinds]


class ZStructService:
    """Z の像と (R_c,Z)-グラフ判定のサービス"""

    def __init__(self, regions: Optional[RegionService] = None):
        self.regions = regions or region_service
        self.geometry = self.regions.kit.geometry
        self.config = get_sweep_config()

    # --- 標本化 -------------------------------------------------------

    def _samples(self, component, count: int = SEGMENT_SAMPLES) -> np.ndarray:
        if isinstance(component, ZPoint):
            return np.array([[component.x1, component.x2]])
        if isinstance(component, ZSegment):
            t = np.linspace(0.0, 1.0, count)[:, None]
            return (1.0 - t) * np.asarray(component.start) + t * np.asarray(component.end)
        p = np.linspace(component.param_range[0], component.param_range[1], count)
        X1, X2 = self.geometry.point(component.curve, p)
        return np.column_stack([np.broadcast_to(X1, p.shape), np.broadcast_to(X2, p.shape)])

    def _inside(self, region: PlanarRegion, points: np.ndarray) -> np.ndarray:
        return np.array([
            region.window.contains(float(a), float(b)) and self.regions.contains(region, (float(a), float(b)), tol=1e-7)
            for a, b in points
        ], dtype=bool)

    # --- 位置特定 -----------------------------------------------------

    @staticmethod
    def _track_interval(edge: ReebEdge, height: float) -> Optional[Tuple[float, float]]:
        iv = edge.interval_at(height)
        if iv is not None or not edge.track:
            return iv
        nearest = min(edge.track, key=lambda s: abs(s.height - height))
        return nearest.lo, nearest.hi

    def _host(self, region: PlanarRegion, x1: float, x2: float, slack: float) -> Optional[SliceInterval]:
        tol = 1e-7 * slack
        for iv in self.regions.slice(region, x1).intervals:
            if iv.lo - tol <= x2 <= iv.hi + tol:
                return iv
        return None

    def locate(
        self, graph: ReebGraph, region: PlanarRegion, point: Tuple[float, float], slack: float = 1.0
    ) -> Tuple[Optional[str], Optional[str]]:
        """(x1, x2) を含む等高線の節点ID または辺ID"""
        x1, x2 = float(point[0]), float(point[1])
        period = graph.flavor.period if graph.is_periodic else 0.0
        host = self._host(region, x1, x2, slack)

        at_level = [n for n in graph.nodes if abs(n.height - x1) <= HEIGHT_TOL * slack * max(1.0, abs(x1))]
        if at_level:
            def distance(node: ReebNode) -> float:
                return min(abs(node.x2 + j * period - x2) for j in (range(-3, 4) if period else (0,)))

            if host is not None:
                eps = 1e-6 * slack
                matches = [
                    n for n in at_level
                    if any(host.lo - eps <= n.x2 + j * period <= host.hi + eps
                           for j in (range(-3, 4) if period else (0,)))
                ]
                if matches:
                    return min(matches, key=distance).id, None
            nearest = min(at_level, key=distance)
            if distance(nearest) <= 1e-4 * slack * max(1.0, abs(x2)):
                return nearest.id, None

        if host is None:
            raise ReebscapeErrors.locate_failed((x1, x2))

        best: Optional[Tuple[float, str]] = None
        for e in graph.edges:
            if not e.heights[0] < x1 < e.heights[1]:
                continue
            iv = self._track_interval(e, x1)
            if iv is None:
                continue
            for j in range(-3, 4) if period else (0,):
                overlap = min(host.hi, iv[1] + j * period) - max(host.lo, iv[0] + j * period)
                if best is None or overlap > best[0]:
                    best = (overlap, e.id)
        if best is None or best[0] < -1e-6 * slack:
            raise ReebscapeErrors.locate_failed((x1, x2))
        return None, best[1]

    # --- 射影 ---------------------------------------------------------

    def project_z(self, region: PlanarRegion, zspec: ZSpec, graph: ReebGraph) -> ZImage:
        """q_c(Z) を孤立点と弧に分ける"""
        start = time.time()
        image = ZImage()
        for component in zspec.components:
            points = self._samples(component)
            mask = self._inside(region, points)
            if not isinstance(component, ZPoint) and 0 < mask.sum() < 4:
                idx = np.nonzero(mask)[0]
                lo_i, hi_i = max(idx[0] - 1, 0), min(idx[-1] + 1, len(points) - 1)
                t = np.linspace(0.0, 1.0, SEGMENT_SAMPLES)[:, None]
                points = (1.0 - t) * points[lo_i] + t * points[hi_i]
                mask = self._inside(region, points)

            located = []
            for p in points[mask]:
                try:
                    key = self.locate(graph, region, p)
                except LocateFailed:
                    logger.warning("Locate failed, retrying with wider tolerance", point=p.tolist())
                    key = self.locate(graph, region, p, slack=100.0)
                located.append((key, float(p[0]), float(p[1])))
            self._coalesce(located, image)

        image.points = self._merge_points(image.points)
        logger.numeric_operation(
            "project_z",
            duration_ms=(time.time() - start) * 1000,
            region=region.name,
            points=len(image.points),
            arcs=len(image.arcs),
        )
        return image

    def _coalesce(self, located, image: ZImage) -> None:
        run: List = []
        for item in located + [None]:
            if run and (item is None or item[0] != run[-1][0]):
                (node, edge) = run[0][0]
                heights = [r[1] for r in run]
                spread = max(heights) - min(heights)
                if edge is not None and spread > self.config.arc_threshold:
                    image.arcs.append(ZImageArc(edge=edge, heights=(min(heights), max(heights))))
                else:
                    image.points.append(ZImagePoint(node=node, edge=edge, height=float(np.mean(heights)),
                                                    x2=run[len(run) // 2][2]))
                run = []
            if item is not None:
                run.append(item)

    @staticmethod
    def _merge_points(points: List[ZImagePoint]) -> List[ZImagePoint]:
        out: List[ZImagePoint] = []
        for p in points:
            if any(q.node == p.node and q.edge == p.edge and abs(q.height - p.height) <= HEIGHT_TOL for q in out):
                continue
            out.append(p)
        return out

    # --- 判定 ---------------------------------------------------------

    def _subdivide(self, graph: ReebGraph, zimage: ZImage) -> Tuple[List[ReebNode], List[ReebEdge], List[str]]:
        nodes = list(graph.nodes)
        edges = list(graph.edges)
        vertices: List[str] = []
        ids = {n.id for n in nodes}

        by_edge: Dict[str, List[ZImagePoint]] = {}
        for p in zimage.points:
            if p.node is not None and p.node in ids:
                vertices.append(p.node)
            elif p.edge is not None and any(e.id == p.edge for e in edges):
                by_edge.setdefault(p.edge, []).append(p)
            else:
                # 再実行時は既に分割済みの z 頂点に一致する
                for n in nodes:
                    if n.kind == NodeKind.Z_VERTEX and abs(n.height - p.height) <= HEIGHT_TOL:
                        vertices.append(n.id)
                        break

        for edge_id, pts in by_edge.items():
            edge = next(e for e in edges if e.id == edge_id)
            edges = [e for e in edges if e.id != edge_id]
            cuts = sorted(pts, key=lambda p: p.height)
            lo, lo_h = edge.lo, edge.heights[0]
            for k, p in enumerate(cuts):
                node = ReebNode(id=f"z:{edge_id}:{k}", height=p.height, kind=NodeKind.Z_VERTEX, x2=p.x2)
                nodes.append(node)
                vertices.append(node.id)
                edges.append(ReebEdge(
                    id=f"{edge_id}.{k}", lo=lo, hi=node.id, heights=(lo_h, p.height),
                    track=[s for s in edge.track if lo_h <= s.height <= p.height],
                ))
                lo, lo_h = node.id, p.height
            edges.append(ReebEdge(
                id=f"{edge_id}.{len(cuts)}", lo=lo, hi=edge.hi, heights=(lo_h, edge.heights[1]),
                track=[s for s in edge.track if s.height >= lo_h], shift=edge.shift,
            ))
        return nodes, edges, list(dict.fromkeys(vertices))

    @staticmethod
    def _dissolve(nodes: List[ReebNode], edges: List[ReebEdge], vertices: List[str]):
        """頂点集合外の次数 2 の節点を辺の内部点にする"""
        keep = set(vertices)
        changed = True
        while changed:
            changed = False
            for node in nodes:
                if node.id in keep:
                    continue
                incident = [e for e in edges if node.id in (e.lo, e.hi)]
                if len(incident) != 2 or incident[0].id == incident[1].id:
                    continue
                a, b = incident
                if a.hi == node.id and b.lo == node.id:
                    merged = ReebEdge(id=a.id, lo=a.lo, hi=b.hi, heights=(a.heights[0], b.heights[1]),
                                      track=a.track + b.track, shift=a.shift + b.shift)
                elif b.hi == node.id and a.lo == node.id:
                    merged = ReebEdge(id=b.id, lo=b.lo, hi=a.hi, heights=(b.heights[0], a.heights[1]),
                                      track=b.track + a.track, shift=a.shift + b.shift)
                else:
                    # 高さ方向に折り返す内部点
                    p = a.hi if a.lo == node.id else a.lo
                    q = b.hi if b.lo == node.id else b.lo
                    s_a = -a.shift if a.lo == node.id else a.shift
                    s_b = b.shift if b.lo == node.id else -b.shift
                    heights = sorted([a.heights[0], a.heights[1], b.heights[0], b.heights[1]])
                    merged = ReebEdge(id=a.id, lo=p, hi=q, heights=(heights[0], heights[-1]),
                                      track=a.track + b.track, shift=s_a + s_b)
                edges = [merged if e.id == a.id else e for e in edges if e.id != b.id]
                nodes = [n for n in nodes if n.id != node.id]
                changed = True
                break
        return nodes, edges

    def decide_zgraph(self, graph: ReebGraph, zimage: ZImage) -> ZGraphVerdict:
        """頂点集合をちょうど q_c(Z) とするグラフ構造があるか"""
        classical = classical_vertices(graph)
        raw = len(zimage.points)

        def verdict(defined: bool, reason=None, refined=None, vertices=None) -> ZGraphVerdict:
            vertices = vertices or []
            added = [v for v in vertices if v not in classical]
            result = ZGraphVerdict(
                defined=defined, reason=reason, refined=refined, vertices=vertices,
                classical_vertex_count=len(classical), added_vertex_count=len(added), raw_z_vertex_count=raw,
            )
            logger.check_result("zgraph", defined, reason=reason, vertices=len(vertices), added=len(added))
            return result

        if zimage.arcs:
            return verdict(False, "arc-in-image")

        nodes, edges, vertices = self._subdivide(graph, zimage)
        nodes, edges = self._dissolve(nodes, edges, vertices)
        keep = set(vertices)

        for node in nodes:
            if node.id in keep:
                continue
            incident = [e for e in edges if node.id in (e.lo, e.hi)]
            degree = sum((e.lo == node.id) + (e.hi == node.id) for e in incident)
            if degree <= 1:
                return verdict(False, "uncovered-endpoint", vertices=vertices)
            if len(incident) == 1:
                return verdict(False, "vertexless-cycle", vertices=vertices)
            return verdict(False, "uncovered-branch", vertices=vertices)

        for e in edges:
            if e.lo == e.hi and e.shift == 0:
                return verdict(False, "loop-cell", vertices=vertices)

        refined = graph.model_copy(update={"nodes": nodes, "edges": edges})
        return verdict(True, refined=refined, vertices=vertices)

    def remark1_vertices(self, graph: ReebGraph, zimage: ZImage) -> VertexSet:
        """臨界等高線と Z と交わる等高線の和集合"""
        warning = bool(zimage.arcs)
        if warning:
            logger.warning("Z image contains arcs; vertex set is not discrete", arcs=len(zimage.arcs))
        result = VertexSet(critical_nodes=classical_vertices(graph), z_points=list(zimage.points),
                           non_discrete_warning=warning)
        logger.info("Remark-1 vertex set", size=result.size, warning=warning)
        return result

    # --- 同型 ---------------------------------------------------------

    @staticmethod
    def _size(graph: ReebGraph) -> Tuple[int, int]:
        return len(graph.nodes), len(graph.edges)

    def iso_check(self, g1: ReebGraph, g2: ReebGraph, respect_heights: bool = False) -> bool:
        """同型判定（周期商は継ぎ目シフトのゲージ込みのバックトラック）"""
        start = time.time()
        try:
            if self._size(g1) != self._size(g2) or g1.is_periodic != g2.is_periodic:
                raise ReebscapeErrors.size_mismatch(self._size(g1), self._size(g2))
            if g1.is_periodic:
                result = self._match(g1, g2, respect_heights) is not None
            else:
                result = self._nx_isomorphic(g1, g2, respect_heights)
        except SizeMismatch as exc:
            logger.info("Size mismatch", **exc.details)
            result = False
        logger.numeric_operation(
            "iso_check",
            duration_ms=(time.time() - start) * 1000,
            isomorphic=result,
            respect_heights=respect_heights,
        )
        return result

    @staticmethod
    def _nx_graph(graph: ReebGraph, directed: bool) -> nx.MultiGraph:
        g = nx.MultiDiGraph() if directed else nx.MultiGraph()
        for n in graph.nodes:
            g.add_node(n.id, kind=n.kind.value, height=n.height)
        for e in graph.edges:
            g.add_edge(e.lo, e.hi)
        return g

    def _nx_isomorphic(self, g1: ReebGraph, g2: ReebGraph, respect_heights: bool) -> bool:
        """有限グラフは networkx の VF2 に任せる"""
        def same_node(a: Dict, b: Dict) -> bool:
            return a["kind"] == b["kind"] and abs(a["height"] - b["height"]) <= HEIGHT_TOL * max(1.0, abs(a["height"]))

        return nx.is_isomorphic(
            self._nx_graph(g1, respect_heights),
            self._nx_graph(g2, respect_heights),
            node_match=same_node if respect_heights else None,
        )

    @staticmethod
    def _adjacency(graph: ReebGraph, directed: bool) -> Dict[Tuple[str, str], Counter]:
        adj: Dict[Tuple[str, str], Counter] = {}
        for e in graph.edges:
            adj.setdefault((e.lo, e.hi), Counter())[e.shift] += 1
            if not directed and e.lo != e.hi:
                adj.setdefault((e.hi, e.lo), Counter())[-e.shift] += 1
            elif not directed:
                adj[(e.lo, e.hi)][-e.shift] += 1
        return adj

    def _match(self, g1: ReebGraph, g2: ReebGraph, respect_heights: bool) -> Optional[Dict[str, str]]:
        directed = respect_heights
        adj1, adj2 = self._adjacency(g1, directed), self._adjacency(g2, directed)
        nodes1, nodes2 = [n.id for n in g1.nodes], [n.id for n in g2.nodes]
        by1, by2 = {n.id: n for n in g1.nodes}, {n.id: n for n in g2.nodes}

        def neighbours(adj, node_ids):
            out = {n: set() for n in node_ids}
            for (a, b) in adj:
                out[a].add(b)
                out[b].add(a)
            return out

        nb1, nb2 = neighbours(adj1, nodes1), neighbours(adj2, nodes2)

        def degree(graph: ReebGraph, node_id: str) -> Tuple:
            role = graph.role(node_id)
            return role if directed else (sum(role),)

        def signature(graph: ReebGraph, nb, node_id: str) -> Tuple:
            sig = (degree(graph, node_id), tuple(sorted(degree(graph, m) for m in nb[node_id])))
            if respect_heights:
                sig += (graph.node(node_id).kind.value,)
            return sig

        sig2: Dict[Tuple, List[str]] = {}
        for v in nodes2:
            sig2.setdefault(signature(g2, nb2, v), []).append(v)

        # BFS 順で並べ、連結成分の先頭以外は写像済みの隣接点を持つようにする
        order: List[str] = []
        seen = set()
        for root in sorted(nodes1, key=lambda u: len(sig2.get(signature(g1, nb1, u), []))):
            if root in seen:
                continue
            queue = deque([root])
            seen.add(root)
            while queue:
                u = queue.popleft()
                order.append(u)
                for w in sorted(nb1[u]):
                    if w not in seen:
                        seen.add(w)
                        queue.append(w)

        mapping: Dict[str, str] = {}
        offset: Dict[str, int] = {}
        used = set()

        def shifts(adj, a, b) -> Counter:
            return adj.get((a, b), Counter())

        def moved(counter: Counter, delta: int) -> Counter:
            return Counter({s + delta: c for s, c in counter.items()})

        def consistent(u: str, v: str, o: int) -> bool:
            if respect_heights and abs(by1[u].height - by2[v].height) > HEIGHT_TOL * max(1.0, abs(by1[u].height)):
                return False
            if shifts(adj1, u, u) != shifts(adj2, v, v):
                return False
            # 辺 x→y のシフト s は s + offset(y) - offset(x) に写る
            for a, b in mapping.items():
                if moved(shifts(adj1, u, a), offset[a] - o) != shifts(adj2, v, b):
                    return False
                if moved(shifts(adj1, a, u), o - offset[a]) != shifts(adj2, b, v):
                    return False
            return True

        def candidate_offsets(u: str, v: str) -> List[int]:
            if not g1.is_periodic:
                return [0]
            for a in nb1[u]:
                if a not in mapping or a == u:
                    continue
                out_1, out_2 = shifts(adj1, u, a), shifts(adj2, v, mapping[a])
                if out_1 and out_2:
                    return sorted({min(out_1) + offset[a] - t for t in out_2})
                in_1, in_2 = shifts(adj1, a, u), shifts(adj2, mapping[a], v)
                if in_1 and in_2:
                    return sorted({t - min(in_1) + offset[a] for t in in_2})
            return [0]

        def backtrack(idx: int) -> bool:
            if idx == len(order):
                return True
            u = order[idx]
            for v in sig2.get(signature(g1, nb1, u), []):
                if v in used:
                    continue
                for o in candidate_offsets(u, v):
                    if not consistent(u, v, o):
                        continue
                    mapping[u], offset[u] = v, o
                    used.add(v)
                    if backtrack(idx + 1):
                        return True
                    del mapping[u], offset[u]
                    used.discard(v)
            return False

        return dict(mapping) if backtrack(0) else None


# グローバルサービスインスタンス
zstruct_service = ZStructService()
