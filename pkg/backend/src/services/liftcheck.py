"""
懸垂写像の検証サービス

e(x1,x2,y1,y2) = (f1 - |y1|², f2 - |y2|²) の評価、零点集合の標本化、
中心差分ヤコビアンの数値ランク、座標射影の臨界等高線の数え上げを提供する。
"""

import math
import time
from typing import List, Optional, Sequence, Tuple

import numpy as np

from shared.models.curves import Constraint, ParabolaChain, PlanarRegion
from shared.models.lift import SuspensionMap, RankResult, RankReport, CriticalCountReport
from shared.models.reeb import NodeKind, NotAGraphEvidence

from .regions import region_service, RegionService
from .reebsweep import reeb_sweep_service, ReebSweepService
from ..config.settings import get_lift_config
from ..core.errors import ReebscapeErrors, EmptyRegion, GapPoint
from ..core.logging import get_logger, LogCategory


logger = get_logger(__name__, LogCategory.LIFTCHECK)

COUNTED_KINDS = (
    NodeKind.BIRTH, NodeKind.DEATH, NodeKind.SPLIT, NodeKind.MERGE, NodeKind.TANGENCY_DEGENERATE,
)


class LiftCheckService:
    """懸垂写像の検証サービス"""

    def __init__(self, regions: Optional[RegionService] = None, sweep: Optional[ReebSweepService] = None):
        self.regions = regions or region_service
        self.sweep = sweep or reeb_sweep_service
        self.geometry = self.regions.kit.geometry
        self.config = get_lift_config()

    # --- 評価 ---------------------------------------------------------

    def _product(self, factors: Sequence[Constraint], x1, x2) -> np.ndarray:
        out = np.ones(np.shape(x1), dtype=float)
        for c in factors:
            out = out * self.regions.constraint_value(c, x1, x2)
        return out

    def plane_values(self, smap: SuspensionMap, x1, x2) -> Tuple[np.ndarray, np.ndarray]:
        """(f1, f2)"""
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        return self._product(smap.f1_factors, x1, x2), self._product(smap.f2_factors, x1, x2)

    def eval_map(self, smap: SuspensionMap, point: Sequence[float]) -> Tuple[float, float]:
        """e(p)"""
        p = np.asarray(point, dtype=float)
        if p.shape != (smap.dimension,):
            raise ValueError(f"point must have dimension {smap.dimension}, got {p.shape}")
        f1, f2 = self.plane_values(smap, p[0:1], p[1:2])
        y1 = p[2:2 + smap.m1]
        y2 = p[2 + smap.m1:]
        return float(f1[0] - y1 @ y1), float(f2[0] - y2 @ y2)

    def _eval_vector(self, smap: SuspensionMap, p: np.ndarray) -> np.ndarray:
        return np.array(self.eval_map(smap, p))

    # --- 標本化 -------------------------------------------------------

    @staticmethod
    def _sphere(rng: np.random.Generator, count: int, dim: int, radius: np.ndarray) -> np.ndarray:
        v = rng.standard_normal((count, dim))
        norms = np.linalg.norm(v, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        return v / norms * radius[:, None]

    def _sample_part(self, smap: SuspensionMap, n: int, rng: np.random.Generator, region: PlanarRegion) -> np.ndarray:
        w = smap.window
        batch = max(4 * n, 256)
        kept_x1: List[np.ndarray] = []
        kept_x2: List[np.ndarray] = []
        total = 0
        for _ in range(self.config.max_rejection_rounds):
            x1 = rng.uniform(w.x1[0], w.x1[1], batch)
            x2 = rng.uniform(w.x2[0], w.x2[1], batch)
            mask = np.ones(batch, dtype=bool)
            for c in region.constraints:
                mask &= self.regions.constraint_value(c, x1, x2) >= 0.0
            kept_x1.append(x1[mask])
            kept_x2.append(x2[mask])
            total += int(mask.sum())
            if total >= n:
                break
        if total < n:
            raise EmptyRegion(
                "rejection sampling did not find enough region points in the window",
                details={"requested": n, "found": total, "window": w.model_dump()},
            )
        x1 = np.concatenate(kept_x1)[:n]
        x2 = np.concatenate(kept_x2)[:n]
        f1, f2 = self.plane_values(smap, x1, x2)
        y1 = self._sphere(rng, n, smap.m1, np.sqrt(np.maximum(f1, 0.0)))
        y2 = self._sphere(rng, n, smap.m2, np.sqrt(np.maximum(f2, 0.0)))
        return np.column_stack([x1, x2, y1, y2])

    def sample_zero_set(self, smap: SuspensionMap, n: int, seed: int = 0, partitions: int = 1) -> np.ndarray:
        """零点集合の標本（シード固定で決定的、分割ごとに子シードを使う）"""
        start = time.time()
        if n <= 0:
            return np.empty((0, smap.dimension))
        region = smap.plane_region()
        partitions = max(1, min(partitions, n))
        children = np.random.SeedSequence(seed).spawn(partitions)
        sizes = [n // partitions + (1 if k < n % partitions else 0) for k in range(partitions)]
        parts = [
            self._sample_part(smap, size, np.random.default_rng(child), region)
            for child, size in zip(children, sizes)
        ]
        points = np.vstack(parts)
        logger.numeric_operation(
            "sample_zero_set",
            duration_ms=(time.time() - start) * 1000,
            map=smap.name,
            count=n,
            seed=seed,
        )
        return points

    # --- ヤコビアン ---------------------------------------------------

    def _singular_distance(self, smap: SuspensionMap, x1: float, x2: float) -> float:
        """平面点から因子の非解析線・折れ目までの距離"""
        best = math.inf
        for c in list(smap.f1_factors) + list(smap.f2_factors):
            base, A, b = self.geometry.flatten(c.curve)
            if isinstance(base, ParabolaChain):
                _, xi2 = self.geometry._inverse(A, b, np.asarray(x1), np.asarray(x2))
                kink = base.offset + base.period / 2.0
                t = (float(xi2) - kink) / base.period
                best = min(best, abs(t - round(t)) * base.period)
            else:
                best = min(best, self.geometry.gap_distance(c.curve, x1, x2))
        return best

    def numeric_jacobian(self, smap: SuspensionMap, point: Sequence[float], h: Optional[float] = None,
                         strict: bool = False) -> Tuple[np.ndarray, bool]:
        """中心差分ヤコビアン（欠損点をまたぐ平面方向は片側差分）"""
        if h is None:
            h = self.config.jacobian_step
        p = np.asarray(point, dtype=float)
        jac = np.empty((2, p.size))
        shifted = False
        near_gap = self._singular_distance(smap, p[0], p[1]) <= 2.0 * h
        if near_gap and strict:
            raise GapPoint("finite-difference probe crosses an analyticity gap",
                           details={"point": p[:2].tolist(), "step": h})
        for i in range(p.size):
            e = np.zeros_like(p)
            e[i] = h
            if i < 2 and near_gap:
                forward = self._singular_distance(smap, *(p + 2.0 * e)[:2])
                backward = self._singular_distance(smap, *(p - 2.0 * e)[:2])
                sign = 1.0 if forward >= backward else -1.0
                jac[:, i] = sign * (self._eval_vector(smap, p + sign * e) - self._eval_vector(smap, p)) / h
                shifted = True
            else:
                jac[:, i] = (self._eval_vector(smap, p + e) - self._eval_vector(smap, p - e)) / (2.0 * h)
        return jac, shifted

    def jacobian_rank(self, smap: SuspensionMap, point: Sequence[float], h: Optional[float] = None,
                      strict: bool = False) -> RankResult:
        """特異値 σ ≥ rel·σ_max の個数"""
        jac, shifted = self.numeric_jacobian(smap, point, h, strict)
        return self.rank_of(jac, shifted)

    def rank_of(self, jac: np.ndarray, shifted: bool = False) -> RankResult:
        s = np.linalg.svd(jac, compute_uv=False)
        smax = float(s.max()) if s.size else 0.0
        rank = int(np.sum(s >= self.config.rank_rel_threshold * smax)) if smax > 0.0 else 0
        return RankResult(rank=rank, singular_values=s.tolist(), gap_shifted=shifted)

    def analytic_jacobian(self, smap: SuspensionMap, point: Sequence[float]) -> np.ndarray:
        """積の微分で組んだヤコビアン"""
        p = np.asarray(point, dtype=float)
        jac = np.zeros((2, p.size))
        for row, factors in enumerate((smap.f1_factors, smap.f2_factors)):
            values = [float(self.regions.constraint_value(c, p[0:1], p[1:2])[0]) for c in factors]
            for k, c in enumerate(factors):
                g1, g2 = self.geometry.gradient(c.curve, p[0:1], p[1:2])
                rest = float(np.prod([v for j, v in enumerate(values) if j != k]))
                jac[row, 0] += c.side * float(np.asarray(g1).ravel()[0]) * rest
                jac[row, 1] += c.side * float(np.asarray(g2).ravel()[0]) * rest
        jac[0, 2:2 + smap.m1] = -2.0 * p[2:2 + smap.m1]
        jac[1, 2 + smap.m1:] = -2.0 * p[2 + smap.m1:]
        return jac

    def gradient_check(self, smap: SuspensionMap, points: np.ndarray, h: Optional[float] = None) -> float:
        """差分と解析ヤコビアンの最大相対誤差（欠損点近傍は除く）"""
        worst = 0.0
        clearance = self.config.gap_clearance
        for p in points:
            if self._singular_distance(smap, p[0], p[1]) < clearance:
                continue
            numeric, _ = self.numeric_jacobian(smap, p, h)
            exact = self.analytic_jacobian(smap, p)
            scale = max(1.0, float(np.max(np.abs(exact))))
            worst = max(worst, float(np.max(np.abs(numeric - exact))) / scale)
        logger.check_result("gradient", worst < 1e-5, max_relative_error=worst, samples=len(points))
        return worst

    def rank_report(self, smap: SuspensionMap, points: np.ndarray, h: Optional[float] = None) -> RankReport:
        """全標本の |e| とランク"""
        start = time.time()
        report = RankReport()
        for p in points:
            residual = max(abs(v) for v in self.eval_map(smap, p))
            report.max_residual = max(report.max_residual, residual)
            if self._singular_distance(smap, p[0], p[1]) < self.config.gap_clearance:
                report.skipped_near_gap += 1
                continue
            result = self.jacobian_rank(smap, p, h)
            if result.rank == 2 and residual < 1e-10:
                report.pass_count += 1
            else:
                report.fail_list.append({
                    "point": p.tolist(), "rank": result.rank, "residual": residual,
                    "singular_values": result.singular_values,
                })
        logger.numeric_operation(
            "rank_report",
            duration_ms=(time.time() - start) * 1000,
            map=smap.name,
            passed=report.pass_count,
            skipped=report.skipped_near_gap,
            failed=len(report.fail_list),
            max_residual=report.max_residual,
        )
        return report

    # --- 射影の臨界点 -------------------------------------------------

    def projection_critical_count(
        self, smap: SuspensionMap, axis: int, period: Optional[float] = None, tol: Optional[float] = None
    ) -> CriticalCountReport:
        """座標射影の臨界等高線（period を与えると一周期分）"""
        if axis not in (0, 1):
            raise ValueError("axis must be 0 (x1) or 1 (x2)")
        region = smap.plane_region()
        if axis == 1:
            region = self.regions.swap_axes(region)
        result = self.sweep.build_reeb(region, periodic=False, tol=tol)
        if isinstance(result, NotAGraphEvidence):
            raise ReebscapeErrors.accumulation(result.focus, result.heights, "projection_critical_count")

        def home(x2: float) -> bool:
            if period is None:
                return True
            lo = 0.5 * (region.window.x2[0] + region.window.x2[1]) - period / 2.0
            return math.floor((x2 - lo) / period + 1e-7) == 0

        critical = [n for n in result.nodes_of_kind(*COUNTED_KINDS) if home(n.x2)]
        ends = sorted({n.height for n in result.nodes_of_kind(NodeKind.END)})
        report = CriticalCountReport(
            axis=axis,
            count=len(critical),
            end_count=len(ends),
            heights=sorted(n.height for n in critical),
            note="end events flagged separately" if ends else None,
        )
        logger.check_result("projection_critical_count", True, axis=axis, count=report.count, ends=report.end_count)
        return report


# グローバルサービスインスタンス
liftcheck_service = LiftCheckService()
