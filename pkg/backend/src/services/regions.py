"""
平面領域のスライス・所属判定・境界事象サービス
"""

import math
import time
from itertools import combinations
from typing import List, Optional, Tuple, Dict

import numpy as np
import mpmath
from scipy.optimize import brentq

from shared.models.curves import (
    PlaneCurve, ParabolaChain, Circle, FnGraph, Transformed, Constraint,
    Window, PlanarRegion, Slice, SliceInterval, BoundaryEvent,
)

from .curvekit import curvekit_service, CurveKitService, RootScan, SWAP_MATRIX
from ..config.settings import get_numerics_config
from ..core.errors import AccumulationSuspected
from ..core.logging import get_logger, LogCategory


logger = get_logger(__name__, LogCategory.REGIONS)

# 事象タグの優先順位（同じ高さで重なった場合）
TAG_PRIORITY = {"end": 0, "vertex-tangency": 1, "corner": 2, "detected": 3}


class RegionService:
    """平面領域サービス"""

    def __init__(self, kit: Optional[CurveKitService] = None):
        self.config = get_numerics_config()
        self.kit = kit or curvekit_service
        self.geometry = self.kit.geometry

    # --- 制約値 -------------------------------------------------------

    def constraint_value(self, constraint: Constraint, x1, x2) -> np.ndarray:
        """g = side·implicit（領域内で g ≥ 0）"""
        return constraint.side * self.geometry.implicit(constraint.curve, x1, x2)

    def _mp_sign(self, constraint: Constraint, x1: float, x2: float) -> int:
        """倍精度で g = 0 になった点の符号を任意精度で決める"""
        base, A, b = self.geometry.flatten(constraint.curve)
        if not isinstance(base, FnGraph):
            return 0
        if isinstance(constraint.curve, Transformed):
            xi1, xi2 = self.geometry.inverse_map_point(constraint.curve, (x1, x2))
        else:
            xi1, xi2 = x1, x2
        value = mpmath.mpf(xi1) - self.kit.eval_mp(base.f, xi2)
        return constraint.side * int(mpmath.sign(value))

    def _feasible(self, region: PlanarRegion, x1: float, x2: np.ndarray) -> np.ndarray:
        ok = np.ones(x2.shape, dtype=bool)
        for constraint in region.constraints:
            g = np.asarray(self.constraint_value(constraint, x1, x2), dtype=float)
            g = np.broadcast_to(g, x2.shape).copy()
            for k in np.nonzero(g == 0.0)[0]:
                g[k] = self._mp_sign(constraint, x1, float(x2[k]))
            ok &= g >= 0.0
        return ok

    def contains(self, region: PlanarRegion, point: Tuple[float, float], tol: Optional[float] = None) -> bool:
        """点が窓内にあり全制約を tol の範囲で満たすか"""
        tol = self.config.residual_tol if tol is None else tol
        x1, x2 = point
        if not region.window.contains(x1, x2):
            return False
        return all(float(self.constraint_value(c, x1, x2)) >= -tol for c in region.constraints)

    # --- 境界との交点 -------------------------------------------------

    def _graph_level_roots(self, base: PlaneCurve, target: float, lo: float, hi: float) -> RootScan:
        """グラフ型曲線で h(ξ2) = target となる ξ2"""
        if isinstance(base, ParabolaChain):
            q = base.sign * (target - base.vertex)
            if q < 0 or math.sqrt(q) > base.period / 2.0:
                return RootScan([])
            r = math.sqrt(q)
            j_lo = math.floor((lo - base.offset) / base.period) - 1
            j_hi = math.ceil((hi - base.offset) / base.period) + 1
            roots = set()
            for j in range(j_lo, j_hi + 1):
                center = base.offset + base.period * j
                for x in (center - r, center + r):
                    if lo <= x <= hi:
                        roots.add(x)
            return RootScan(sorted(roots))
        if base.is_level_line:
            return RootScan([])
        return self.kit.scan_roots(base.f, target, (lo, hi))

    def constraint_crossings(self, constraint: Constraint, x1: float, lo: float, hi: float) -> RootScan:
        """制約曲線と縦線 {x1} × [lo, hi] の交点 x2"""
        curve = constraint.curve
        if isinstance(curve, Circle):
            r2 = curve.level - x1 * x1
            if r2 < 0:
                return RootScan([])
            r = math.sqrt(r2)
            return RootScan(sorted({x for x in (-r, r) if lo <= x <= hi}))
        if isinstance(curve, (ParabolaChain, FnGraph)):
            return self._graph_level_roots(curve, x1, lo, hi)

        base, A, b = self.geometry.flatten(curve)
        M = np.linalg.inv(A)
        d1 = x1 - b[0]
        if isinstance(base, Circle):
            # level - ξ1² - ξ2² は t = x2 - b2 の2次式
            c2 = M[0, 1] ** 2 + M[1, 1] ** 2
            c1 = 2.0 * (M[0, 0] * M[0, 1] + M[1, 0] * M[1, 1]) * d1
            c0 = (M[0, 0] ** 2 + M[1, 0] ** 2) * d1 * d1 - base.level
            ts = self.kit.roots.polynomial_roots([c0, c1, c2], 0.0, lo - b[1], hi - b[1])
            return RootScan([b[1] + t for t in ts])

        if M[0, 1] == 0.0:
            # ξ1 が x2 に依らない：h(ξ2) = ξ1 を基底座標で解いて戻す
            xi1 = M[0, 0] * d1
            ends = sorted((M[1, 0] * d1 + M[1, 1] * (lo - b[1]), M[1, 0] * d1 + M[1, 1] * (hi - b[1])))
            scan = self._graph_level_roots(base, xi1, ends[0], ends[1])

            def back(xi2: float) -> float:
                return b[1] + (xi2 - M[1, 0] * d1) / M[1, 1]

            unresolved = None
            if scan.unresolved is not None:
                unresolved = tuple(sorted((back(scan.unresolved[0]), back(scan.unresolved[1]))))
            return RootScan(sorted(back(r) for r in scan.roots), scan.accumulation, unresolved)

        if M[1, 1] == 0.0:
            # ξ2 が x2 に依らない：x2 について1次
            xi2 = M[1, 0] * d1
            h = float(self.geometry.base_height(base, xi2))
            root = b[1] + (h - M[0, 0] * d1) / M[0, 1]
            return RootScan([root] if lo <= root <= hi else [])

        def fun(x2):
            return self.geometry.implicit(curve, x1, x2)

        def dfun(x2):
            return self.geometry.gradient(curve, np.full_like(x2, x1), x2)[1]

        return RootScan(self.kit.roots.grid_scan(fun, dfun, lo, hi))

    # --- スライス -----------------------------------------------------

    def slice(self, region: PlanarRegion, x1: float, tol: Optional[float] = None) -> Slice:
        """高さ x1 での切り口を極大閉区間の列として返す"""
        tol = self.config.residual_tol if tol is None else tol
        window = region.window
        if not window.x1[0] - tol <= x1 <= window.x1[1] + tol:
            raise ValueError(f"height {x1} lies outside the window x1-range {window.x1}")
        lo, hi = window.x2

        points: List[Tuple[float, Optional[int]]] = [(lo, None), (hi, None)]
        unresolved: List[Tuple[float, float]] = []
        for idx, constraint in enumerate(region.constraints):
            scan = self.constraint_crossings(constraint, x1, lo, hi)
            points.extend((r, idx) for r in scan.roots if lo <= r <= hi)
            if scan.unresolved is not None:
                unresolved.append(scan.unresolved)

        merged: List[List] = []
        for x, source in sorted(points, key=lambda p: p[0]):
            if merged and x - merged[-1][0] <= self.config.event_dedup_tol:
                if merged[-1][1] is None:
                    merged[-1][1] = source
                continue
            merged.append([x, source])
        xs = np.array([m[0] for m in merged])
        sources = [m[1] for m in merged]

        if xs.size == 1:
            feasible_cells = np.zeros(0, dtype=bool)
        else:
            feasible_cells = self._feasible(region, x1, 0.5 * (xs[:-1] + xs[1:]))
        feasible_points = np.array([
            all(float(self.constraint_value(c, x1, x)) >= -tol for c in region.constraints) for x in xs
        ])

        def endpoint(k: int) -> Tuple[Optional[int], bool]:
            return sources[k], sources[k] is None

        intervals: List[SliceInterval] = []
        k = 0
        n_cells = feasible_cells.size
        while k < n_cells:
            if not feasible_cells[k]:
                # 両隣が不可能な可能点は退化区間
                if feasible_points[k] and (k == 0 or not feasible_cells[k - 1]):
                    src, trunc = endpoint(k)
                    intervals.append(SliceInterval(lo=xs[k], hi=xs[k], lo_source=src, hi_source=src,
                                                   lo_truncated=trunc, hi_truncated=trunc))
                k += 1
                continue
            start = k
            while k < n_cells and feasible_cells[k]:
                k += 1
            lo_src, lo_trunc = endpoint(start)
            hi_src, hi_trunc = endpoint(k)
            intervals.append(SliceInterval(lo=xs[start], hi=xs[k], lo_source=lo_src, hi_source=hi_src,
                                           lo_truncated=lo_trunc, hi_truncated=hi_trunc))
            k += 1
        last = xs.size - 1
        if feasible_points[last] and (n_cells == 0 or not feasible_cells[-1]):
            if not intervals or intervals[-1].hi < xs[last]:
                src, trunc = endpoint(last)
                intervals.append(SliceInterval(lo=xs[last], hi=xs[last], lo_source=src, hi_source=src,
                                               lo_truncated=trunc, hi_truncated=trunc))

        return Slice(height=x1, intervals=intervals, unresolved=unresolved)

    # --- 角と事象 -----------------------------------------------------

    def corners(self, region: PlanarRegion, tol: Optional[float] = None) -> List[Tuple[float, float, int, int]]:
        """二つの制約曲線の交点で、他の制約も満たすもの (x1, x2, i, j)"""
        tol = 1e-7 if tol is None else tol
        out: List[Tuple[float, float, int, int]] = []
        n = self.config.grid_density
        for i, j in combinations(range(len(region.constraints)), 2):
            curve_i = region.constraints[i].curve
            other = region.constraints[j]
            p_lo, p_hi = self.geometry.param_window(curve_i, region.window)
            if isinstance(self.geometry.flatten(curve_i)[0], Circle):
                p_lo, p_hi = p_lo - 0.01, p_hi + 0.01
            ps = np.linspace(p_lo, p_hi, n)
            X1, X2 = self.geometry.point(curve_i, ps)
            g = np.asarray(self.constraint_value(other, X1, X2), dtype=float)

            def along(p: float) -> float:
                a, b = self.geometry.point(curve_i, p)
                return float(self.constraint_value(other, a, b))

            sgn = np.sign(g)
            for k in np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]:
                p = brentq(along, ps[k], ps[k + 1], xtol=self.config.corner_tol)
                a, b = self.geometry.point(curve_i, p)
                a, b = float(a), float(b)
                if not region.window.contains(a, b):
                    continue
                rest = [c for m, c in enumerate(region.constraints) if m not in (i, j)]
                if all(float(self.constraint_value(c, a, b)) >= -tol for c in rest):
                    if not any(abs(a - q[0]) < 1e-9 and abs(b - q[1]) < 1e-9 for q in out):
                        out.append((a, b, i, j))
        return out

    def boundary_events(self, region: PlanarRegion, tol: Optional[float] = None) -> List[BoundaryEvent]:
        """臨界高さの候補（鉛直接線・角・端）を昇順で返す"""
        start = time.time()
        tol = self.config.event_dedup_tol if tol is None else tol
        window = region.window
        raw: List[Tuple[float, str, float]] = []

        for constraint in region.constraints:
            curve = constraint.curve
            if isinstance(curve, FnGraph) and curve.is_level_line:
                height = curve.f.coefficients[0]
                if window.x1[0] <= height <= window.x1[1]:
                    s = self.slice(region, height)
                    raw.extend((height, "end", iv.midpoint) for iv in s.intervals)
                continue
            p_window = self.geometry.param_window(curve, window)
            try:
                tangencies = self.kit.vertical_tangents(curve, p_window)
            except AccumulationSuspected as exc:
                logger.warning("Boundary events accumulate", region=region.name, focus=list(exc.focus))
                raise
            for t in tangencies:
                if window.x1[0] <= t.x1 <= window.x1[1] and self.contains(region, (t.x1, t.x2), tol=1e-7):
                    raw.append((t.x1, "vertex-tangency", t.x2))

        for a, b, _, _ in self.corners(region):
            if window.x1[0] <= a <= window.x1[1]:
                raw.append((a, "corner", b))

        for height in window.x1:
            s = self.slice(region, height)
            raw.extend((height, "end", iv.midpoint) for iv in s.intervals)

        events: List[BoundaryEvent] = []
        for height, tag, x2 in sorted(raw, key=lambda e: e[0]):
            if events and height - events[-1].height <= tol:
                last = events[-1]
                if TAG_PRIORITY[tag] < TAG_PRIORITY[last.tag]:
                    last.tag = tag
                if all(abs(x2 - w) > tol for w in last.witnesses):
                    last.witnesses.append(x2)
                continue
            events.append(BoundaryEvent(height=height, tag=tag, witnesses=[x2]))

        logger.numeric_operation(
            "boundary_events",
            duration_ms=(time.time() - start) * 1000,
            region=region.name,
            heights=[e.height for e in events],
        )
        return events

    # --- 変換 ---------------------------------------------------------

    @staticmethod
    def swap_axes(region: PlanarRegion) -> PlanarRegion:
        """x1 と x2 を入れ替えた領域（x2 射影の解析用）"""
        constraints = [
            c.model_copy(update={"curve": Transformed(base=c.curve, matrix=SWAP_MATRIX)})
            for c in region.constraints
        ]
        window = Window(x1=region.window.x2, x2=region.window.x1)
        return PlanarRegion(name=f"{region.name}-swapped", constraints=constraints, window=window)


# グローバルサービスインスタンス
region_service = RegionService()
