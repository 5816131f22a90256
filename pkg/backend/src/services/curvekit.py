"""
関数族・曲線の評価、記号微分、根と極値の分離サービス

S-D-CRAn 関数は (1/x) 空間の振動因子 Q(u) を直接扱い、
e^{-1/x²} がアンダーフローする領域でも根と符号を失わない。
"""

import math
import time
from typing import List, Optional, Tuple, NamedTuple, Callable, Dict, Union

import numpy as np
from numpy.polynomial import polynomial as npoly
import mpmath
from scipy.optimize import brentq

from shared.models.functions import (
    Fn1D, PolynomialFn, SDCRAnFn, TrigTerm, CompositionFn, ExampleOneFn,
    PiecewiseBlendFn, BlendPiece, FnClassification, FlatnessReport, Tangency,
)
from shared.models.curves import PlaneCurve, ParabolaChain, Circle, FnGraph, Transformed, Window

from ..config.settings import get_numerics_config, NumericsConfig
from ..core.errors import ReebscapeErrors, AccumulationSuspected, TooOscillatory
from ..core.logging import get_logger, LogCategory


logger = get_logger(__name__, LogCategory.CURVEKIT)

ArrayLike = Union[float, np.ndarray]


class RootScan(NamedTuple):
    """根の走査結果"""
    roots: List[float]
    accumulation: Optional[float] = None
    unresolved: Optional[Tuple[float, float]] = None


def _scalar(fun: Callable[[np.ndarray], np.ndarray]) -> Callable[[float], float]:
    return lambda t: float(fun(np.array([t], dtype=float))[0])


def _dedupe(values: List[float], tol: float) -> List[float]:
    out: List[float] = []
    for v in sorted(values):
        if not out or v - out[-1] > tol:
            out.append(v)
    return out


# ---------------------------------------------------------------------------
# 評価と微分
# ---------------------------------------------------------------------------

class FunctionEvaluator:
    """Fn1D の評価・高階導関数・記号微分"""

    def __init__(self, config: Optional[NumericsConfig] = None):
        self.config = config or get_numerics_config()
        self._derivative_cache: Dict[str, List[SDCRAnFn]] = {}

    # --- S-D-CRAn -------------------------------------------------------

    @staticmethod
    def sdcran_factor(spec: SDCRAnFn, u: ArrayLike, du_order: int = 0) -> np.ndarray:
        """振動因子 Q(u) = u^{j0} Σ u^i T(sin u, cos u)（du_order=1 で dQ/du）"""
        u = np.asarray(u, dtype=float)
        s, c = np.sin(u), np.cos(u)
        total = np.zeros_like(u)
        for term in spec.terms:
            T = np.asarray(term.T, dtype=float)
            m = spec.j0 + term.i
            trig = npoly.polyval2d(s, c, T)
            if du_order == 0:
                total = total + np.float_power(u, m) * trig
            else:
                dtrig = (
                    c * npoly.polyval2d(s, c, npoly.polyder(T, axis=0))
                    - s * npoly.polyval2d(s, c, npoly.polyder(T, axis=1))
                )
                total = total + m * np.float_power(u, m - 1) * trig + np.float_power(u, m) * dtrig
        return total

    def sdcran_eval(self, spec: SDCRAnFn, x: ArrayLike) -> np.ndarray:
        """R·e^{-u²}·Q(u)、x=0 と指数部アンダーフロー時は厳密に 0"""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros_like(x)
        with np.errstate(divide='ignore', over='ignore'):
            inv2 = np.where(x != 0.0, 1.0 / (x * x), np.inf)
        mask = inv2 <= self.config.underflow_exponent
        if np.any(mask):
            u = 1.0 / x[mask]
            out[mask] = spec.R * np.exp(-u * u) * self.sdcran_factor(spec, u)
        return out

    @staticmethod
    def sdcran_derivative(spec: SDCRAnFn) -> SDCRAnFn:
        """族の中での記号微分

        d/dx [e^{-u²} u^m T] = e^{-u²} [2u^{m+3} T - m u^{m+1} T - u^{m+2}(c ∂_s T - s ∂_c T)]
        （u = 1/x, m = j0 + i）。j0 は保たれ、各項の i は非負のまま増える。
        """
        acc: Dict[int, np.ndarray] = {}

        def add(i: int, mat: np.ndarray):
            if not np.any(mat):
                return
            prev = acc.get(i)
            if prev is None:
                acc[i] = mat.copy()
                return
            shape = (max(prev.shape[0], mat.shape[0]), max(prev.shape[1], mat.shape[1]))
            acc[i] = _pad(prev, shape) + _pad(mat, shape)

        for term in spec.terms:
            T = np.asarray(term.T, dtype=float)
            m = spec.j0 + term.i
            add(term.i + 3, 2.0 * T)
            if m != 0:
                add(term.i + 1, -float(m) * T)
            rot = _trig_rotation(T)
            add(term.i + 2, -rot)

        terms = []
        for i in sorted(acc):
            mat = _trim(acc[i])
            if np.any(mat):
                terms.append(TrigTerm(i=i, T=mat.tolist()))
        if not terms:
            terms = [TrigTerm(i=0, T=[[0.0]])]
        return SDCRAnFn(R=spec.R, j0=spec.j0, terms=terms)

    def sdcran_derivatives(self, spec: SDCRAnFn, order: int) -> List[SDCRAnFn]:
        """[f, f', ..., f^(order)]"""
        key = spec.model_dump_json()
        chain = self._derivative_cache.setdefault(key, [spec])
        while len(chain) <= order:
            chain.append(self.sdcran_derivative(chain[-1]))
        return chain[: order + 1]

    # --- Example 1 ------------------------------------------------------

    @staticmethod
    def example_one_polynomials(order: int) -> List[np.ndarray]:
        """d^n/dx^n e^{-1/x} = e^{-u} P_n(u)、P_{n+1} = u²(P_n - P_n')"""
        polys = [np.array([1.0])]
        for _ in range(order):
            p = polys[-1]
            polys.append(npoly.polymul([0.0, 0.0, 1.0], npoly.polysub(p, npoly.polyder(p))))
        return polys

    def _example_one_jets(self, x: np.ndarray, order: int) -> np.ndarray:
        out = np.zeros((order + 1, x.size))
        with np.errstate(divide='ignore'):
            u = np.where(x > 0, 1.0 / np.where(x > 0, x, 1.0), np.inf)
        mask = (x > 0) & (u <= self.config.underflow_exponent)
        if np.any(mask):
            um = u[mask]
            base = np.exp(-um)
            for k, p in enumerate(self.example_one_polynomials(order)):
                out[k, mask] = base * npoly.polyval(um, p)
        return out

    # --- 一般 ---------------------------------------------------------

    def jets(self, f: Fn1D, x: ArrayLike, order: int) -> np.ndarray:
        """f^(k)(x), k = 0..order を (order+1, n) 配列で返す"""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if isinstance(f, PolynomialFn):
            poly = np.polynomial.Polynomial(f.coefficients)
            return np.vstack([poly.deriv(k)(x) if k else poly(x) for k in range(order + 1)])
        if isinstance(f, SDCRAnFn):
            return np.vstack([self.sdcran_eval(d, x) for d in self.sdcran_derivatives(f, order)])
        if isinstance(f, ExampleOneFn):
            return self._example_one_jets(x, order)
        if isinstance(f, CompositionFn):
            inner = _to_taylor(self.jets(f.inner, x, order))
            return _from_taylor(_series_poly(f.outer.coefficients, inner))
        if isinstance(f, PiecewiseBlendFn):
            return self._blend_jets(f, x, order)
        raise TypeError(f"unsupported function kind: {type(f).__name__}")

    def _blend_jets(self, f: PiecewiseBlendFn, x: np.ndarray, order: int) -> np.ndarray:
        out = np.zeros((order + 1, x.size))
        last = len(f.pieces) - 1
        for idx, piece in enumerate(f.pieces):
            lo = -np.inf if idx == 0 else piece.lo
            hi = np.inf if idx == last else piece.hi
            mask = (x >= lo) & (x <= hi)
            if np.any(mask):
                out[:, mask] = self.jets(piece.fn, x[mask], order)
        scale = np.array([math.factorial(k) for k in range(order + 1)], dtype=float)[:, None]
        for left, right in zip(f.pieces, f.pieces[1:]):
            a, b = left.hi, right.lo
            mask = (x > a) & (x < b)
            if not np.any(mask):
                continue
            xs = x[mask]
            width = b - a
            t = (xs - a) / width
            phi = self._example_one_jets(t, order)
            mirror = self._example_one_jets(1.0 - t, order)
            mirror = mirror * np.array([(-1.0) ** k for k in range(order + 1)])[:, None]
            psi_t = _from_taylor(_series_div(_to_taylor(phi), _to_taylor(phi + mirror)))
            psi = psi_t * np.array([width ** (-k) for k in range(order + 1)])[:, None]
            fl = self.jets(left.fn, xs, order)
            fr = self.jets(right.fn, xs, order)
            mixed = _series_mul(psi / scale, (fr - fl) / scale) * scale
            out[:, mask] = fl + mixed
        return out

    def eval(self, f: Fn1D, x: ArrayLike, order: int = 0) -> ArrayLike:
        """f^(order)(x)。スカラー入力にはスカラーを返す"""
        scalar = np.ndim(x) == 0
        values = self.jets(f, x, order)[order]
        return float(values[0]) if scalar else values

    def derivative_sign(self, f: Fn1D, x: float) -> int:
        """f'(x) の符号（平坦因子のアンダーフローに影響されない）"""
        if isinstance(f, SDCRAnFn):
            if x == 0.0:
                return 0
            d = self.sdcran_derivative(f)
            return int(np.sign(d.R * self.sdcran_factor(d, 1.0 / x)))
        if isinstance(f, CompositionFn):
            t = self.eval(f.inner, x)
            outer = np.polynomial.Polynomial(f.outer.coefficients).deriv()(t)
            return int(np.sign(outer)) * self.derivative_sign(f.inner, x)
        if isinstance(f, ExampleOneFn):
            return 1 if x > 0 else 0
        return int(np.sign(self.eval(f, x, order=1)))

    # --- 任意精度 -----------------------------------------------------

    def eval_mp(self, f: Fn1D, x, dps: int = 60):
        """mpmath による評価（倍精度の範囲外の値も保持する）"""
        with mpmath.workdps(dps):
            x = mpmath.mpf(x)
            if isinstance(f, PolynomialFn):
                return mpmath.polyval(list(reversed(f.coefficients)), x)
            if isinstance(f, SDCRAnFn):
                if x == 0:
                    return mpmath.mpf(0)
                u = 1 / x
                s, c = mpmath.sin(u), mpmath.cos(u)
                total = mpmath.mpf(0)
                for term in f.terms:
                    trig = mpmath.mpf(0)
                    for a, row in enumerate(term.T):
                        for b, coef in enumerate(row):
                            if coef:
                                trig += coef * s ** a * c ** b
                    total += u ** (f.j0 + term.i) * trig
                return f.R * mpmath.exp(-u * u) * total
            if isinstance(f, ExampleOneFn):
                return mpmath.exp(-1 / x) if x > 0 else mpmath.mpf(0)
            if isinstance(f, CompositionFn):
                inner = self.eval_mp(f.inner, x, dps)
                return mpmath.polyval(list(reversed(f.outer.coefficients)), inner)
            return mpmath.mpf(self.eval(f, float(x)))

    # --- 分類 ---------------------------------------------------------

    def classify(self, f: Fn1D) -> FnClassification:
        """解析性の欠損集合と D-RAn / D-CRAn フラグ"""
        if isinstance(f, PolynomialFn):
            return FnClassification(analyticity_gap=[], is_dran=True, is_dcran=True)
        if isinstance(f, SDCRAnFn):
            return FnClassification(analyticity_gap=[0.0], is_dran=True, is_dcran=True)
        if isinstance(f, ExampleOneFn):
            return FnClassification(analyticity_gap=[0.0], is_dran=True, is_dcran=False)
        if isinstance(f, CompositionFn):
            inner = self.classify(f.inner)
            if all(c == 0.0 for c in f.outer.coefficients[1:]):
                return FnClassification(analyticity_gap=[], is_dran=True, is_dcran=True)
            return inner
        if isinstance(f, PiecewiseBlendFn):
            gaps: List[float] = []
            for piece in f.pieces:
                gaps.extend(g for g in self.classify(piece.fn).analyticity_gap if piece.lo <= g <= piece.hi)
            for a, b in f.blend_windows:
                gaps.extend([a, b])
            return FnClassification(analyticity_gap=sorted(set(gaps)), is_dran=True, is_dcran=False)
        raise TypeError(f"unsupported function kind: {type(f).__name__}")


def _pad(mat: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
    out = np.zeros(shape)
    out[: mat.shape[0], : mat.shape[1]] = mat
    return out


def _trim(mat: np.ndarray) -> np.ndarray:
    rows = np.nonzero(np.any(mat != 0, axis=1))[0]
    cols = np.nonzero(np.any(mat != 0, axis=0))[0]
    if rows.size == 0:
        return np.zeros((1, 1))
    return mat[: rows[-1] + 1, : cols[-1] + 1]


def _trig_rotation(T: np.ndarray) -> np.ndarray:
    """c·∂_s T - s·∂_c T"""
    a_dim, b_dim = T.shape
    out = np.zeros((a_dim + 1, b_dim + 1))
    for a in range(a_dim):
        for b in range(b_dim):
            coef = T[a, b]
            if coef == 0:
                continue
            if a > 0:
                out[a - 1, b + 1] += a * coef
            if b > 0:
                out[a + 1, b - 1] -= b * coef
    return out


def _to_taylor(jets: np.ndarray) -> np.ndarray:
    scale = np.array([math.factorial(k) for k in range(jets.shape[0])], dtype=float)[:, None]
    return jets / scale


def _from_taylor(coeffs: np.ndarray) -> np.ndarray:
    scale = np.array([math.factorial(k) for k in range(coeffs.shape[0])], dtype=float)[:, None]
    return coeffs * scale


def _series_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    for k in range(a.shape[0]):
        for j in range(k + 1):
            out[k] += a[j] * b[k - j]
    return out


def _series_div(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    for k in range(a.shape[0]):
        acc = a[k].copy()
        for j in range(1, k + 1):
            acc -= b[j] * out[k - j]
        out[k] = acc / b[0]
    return out


def _series_poly(coefficients: List[float], a: np.ndarray) -> np.ndarray:
    """多項式に冪級数を代入（Horner）"""
    out = np.zeros_like(a)
    out[0] = coefficients[-1]
    for coef in reversed(coefficients[:-1]):
        out = _series_mul(out, a)
        out[0] += coef
    return out


# ---------------------------------------------------------------------------
# 根の分離
# ---------------------------------------------------------------------------

class RootFinder:
    """格子上の符号変化＋Brent 法による根の分離"""

    def __init__(self, evaluator: FunctionEvaluator, config: Optional[NumericsConfig] = None):
        self.evaluator = evaluator
        self.config = config or evaluator.config

    def _grid_pass(
        self,
        fun: Callable[[np.ndarray], np.ndarray],
        dfun: Optional[Callable[[np.ndarray], np.ndarray]],
        xs: np.ndarray,
        touch_scale: float,
    ) -> List[float]:
        ys = fun(xs)
        roots: List[float] = list(xs[ys == 0.0])
        sgn = np.sign(ys)
        scalar = _scalar(fun)
        for i in np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]:
            roots.append(brentq(scalar, xs[i], xs[i + 1], xtol=self.config.root_xtol))
        if dfun is not None:
            ds = np.sign(dfun(xs))
            dscalar = _scalar(dfun)
            for i in np.nonzero(ds[:-1] * ds[1:] < 0)[0]:
                xc = brentq(dscalar, xs[i], xs[i + 1], xtol=self.config.root_xtol)
                local = max(abs(ys[i]), abs(ys[i + 1]), touch_scale)
                if abs(scalar(xc)) <= self.config.residual_tol * local:
                    roots.append(xc)
        return roots

    def grid_scan(
        self,
        fun: Callable[[np.ndarray], np.ndarray],
        dfun: Optional[Callable[[np.ndarray], np.ndarray]],
        lo: float,
        hi: float,
        density: Optional[int] = None,
        touch_scale: float = 1.0,
    ) -> List[float]:
        """密度を倍にしても根の数が変わらなくなるまで細分化する"""
        n = density or self.config.grid_density
        tol = 10 * self.config.root_xtol
        prev = _dedupe(self._grid_pass(fun, dfun, np.linspace(lo, hi, n), touch_scale), tol)
        while True:
            if 2 * n > self.config.max_density:
                raise ReebscapeErrors.too_oscillatory(n, (lo, hi))
            n *= 2
            cur = _dedupe(self._grid_pass(fun, dfun, np.linspace(lo, hi, n), touch_scale), tol)
            if len(cur) == len(prev):
                return cur
            prev = cur

    def oscillation_scan(
        self,
        fun: Callable[[np.ndarray], np.ndarray],
        dfun: Optional[Callable[[np.ndarray], np.ndarray]],
        v_lo: float,
        v_hi: float,
    ) -> Tuple[List[float], Optional[float]]:
        """u = 1/|x| 空間を min(π/ppp, 1/(4u)) 刻みで走査する

        kπ 付近の根の対は間隔がおよそ 1/u まで縮むので、刻みも u に反比例させる。
        戻り値の第2要素は、根が尽きずに打ち切った場合の打ち切り位置 v。
        """
        base_step = math.pi / self.config.oscillation_points_per_pi
        max_count = self.config.oscillation_max_count
        unbounded = not math.isfinite(v_hi)
        v_end = v_lo + (max_count + 4) * math.pi if unbounded else v_hi
        chunk = 64 * math.pi
        roots: List[float] = []
        v = v_lo
        while v < v_end:
            stop = min(v + chunk, v_end)
            step = min(base_step, 1.0 / (4.0 * stop))
            grid = np.append(np.arange(v, stop, step), stop)
            if grid.size < 2:
                break
            roots.extend(self._grid_pass(fun, dfun, grid, 0.0))
            roots = _dedupe(roots, 10 * self.config.root_xtol)
            if len(roots) >= max_count:
                return roots[:max_count], roots[max_count - 1]
            v = stop
        if unbounded and roots and roots[-1] > v_end - 2 * math.pi:
            return roots, roots[-1]
        return roots, None

    # --- 族ごとの根 ---------------------------------------------------

    def polynomial_roots(self, coefficients: List[float], target: float, lo: float, hi: float) -> List[float]:
        coefs = np.array(coefficients, dtype=float)
        coefs[0] -= target
        coefs = np.trim_zeros(coefs, 'b')
        if coefs.size <= 1:
            return []
        raw = npoly.polyroots(coefs)
        real = [r.real for r in raw if abs(r.imag) <= 1e-9 * max(1.0, abs(r))]
        tol = self.config.residual_tol
        return _dedupe([r for r in real if lo - tol <= r <= hi + tol], 10 * self.config.root_xtol)

    def _envelope_cutoff(self, spec: SDCRAnFn, level: float) -> float:
        """|f(x)| ≤ level が 1/|x| ≥ V で保証される V"""
        weights = [(spec.j0 + t.i, float(np.abs(np.asarray(t.T)).sum())) for t in spec.terms]
        top = max(max(k for k, _ in weights), 0)
        v = max(1.0, math.sqrt(top / 2.0) + 1.0)
        while True:
            bound = abs(spec.R) * math.exp(-v * v) * sum(w * v ** k for k, w in weights)
            if bound < level:
                return v
            v *= 1.25

    def sdcran_scan(self, spec: SDCRAnFn, target: float, lo: float, hi: float) -> RootScan:
        ev = self.evaluator
        roots: List[float] = []
        accumulation: Optional[float] = None
        unresolved: Optional[Tuple[float, float]] = None
        flat_zero = target == 0.0
        if flat_zero and lo <= 0.0 <= hi:
            roots.append(0.0)
        trig_free = all(np.asarray(t.T).size == 1 for t in spec.terms)

        for side in (1.0, -1.0):
            a, b = (max(lo, 0.0), hi) if side > 0 else (max(-hi, 0.0), -lo)
            if b <= 0.0 or a >= b:
                continue
            v_lo = 1.0 / b
            v_hi = 1.0 / a if a > 0 else math.inf

            if flat_zero and trig_free:
                # Q は u の多項式×u^{j0}
                coefs = np.zeros(max(t.i for t in spec.terms) + 1)
                for t in spec.terms:
                    coefs[t.i] += t.T[0][0]
                far = min(v_hi, 1e300)
                u_lo, u_hi = (v_lo, far) if side > 0 else (-far, -v_lo)
                us = self.polynomial_roots(list(coefs), 0.0, u_lo, u_hi)
                roots.extend(1.0 / u for u in us if u != 0.0)
                continue

            if flat_zero:
                def fun(v, side=side):
                    return ev.sdcran_factor(spec, side * v)

                def dfun(v, side=side):
                    return side * ev.sdcran_factor(spec, side * v, du_order=1)
            else:
                v_hi = min(v_hi, self._envelope_cutoff(spec, abs(target)))
                if v_lo >= v_hi:
                    continue
                deriv = ev.sdcran_derivative(spec)

                def fun(v, side=side):
                    return ev.sdcran_eval(spec, side / v) - target

                def dfun(v, side=side):
                    return ev.sdcran_eval(deriv, side / v) * (-side / (v * v))

            found, cut = self.oscillation_scan(fun, dfun, v_lo, v_hi)
            roots.extend(side / v for v in found)
            if cut is not None:
                if not flat_zero:
                    raise ReebscapeErrors.too_oscillatory(len(found), (lo, hi))
                accumulation = 0.0
                edge = 1.0 / cut
                piece = (0.0, edge) if side > 0 else (-edge, 0.0)
                if unresolved is None:
                    unresolved = piece
                else:
                    unresolved = (min(unresolved[0], piece[0]), max(unresolved[1], piece[1]))

        tol = 10 * self.config.root_xtol
        kept = [r for r in roots if lo - tol <= r <= hi + tol]
        return RootScan(_dedupe(kept, tol), accumulation, unresolved)

    def scan(self, f: Fn1D, target: float, lo: float, hi: float, density: Optional[int] = None) -> RootScan:
        """f(x) = target の根を [lo, hi] で列挙する"""
        ev = self.evaluator
        if isinstance(f, PolynomialFn):
            return RootScan(self.polynomial_roots(f.coefficients, target, lo, hi))
        if isinstance(f, SDCRAnFn):
            return self.sdcran_scan(f, target, lo, hi)
        if isinstance(f, ExampleOneFn):
            if target == 0.0:
                return RootScan([0.0] if lo <= 0.0 <= hi else [])
            if 0.0 < target < 1.0:
                r = -1.0 / math.log(target)
                return RootScan([r] if lo <= r <= hi else [])
            return RootScan([])
        if isinstance(f, CompositionFn):
            levels = self.polynomial_roots(f.outer.coefficients, target, -math.inf, math.inf)
            roots: List[float] = []
            accumulation = None
            unresolved = None
            for t in levels:
                part = self.scan(f.inner, t, lo, hi, density)
                roots.extend(part.roots)
                if part.accumulation is not None:
                    accumulation = part.accumulation
                    unresolved = part.unresolved
            return RootScan(_dedupe(roots, 10 * self.config.root_xtol), accumulation, unresolved)

        def fun(x):
            return ev.eval(f, x) - target

        def dfun(x):
            return ev.eval(f, x, order=1)

        return RootScan(self.grid_scan(fun, dfun, lo, hi, density, touch_scale=max(1.0, abs(target))))

    # --- 臨界点 -------------------------------------------------------

    def critical_points(self, f: Fn1D, lo: float, hi: float) -> RootScan:
        """f' = 0 の点（平坦点そのものは除く）"""
        ev = self.evaluator
        if isinstance(f, PolynomialFn):
            deriv = np.polynomial.Polynomial(f.coefficients).deriv()
            return RootScan(self.polynomial_roots(list(deriv.coef), 0.0, lo, hi))
        if isinstance(f, SDCRAnFn):
            scan = self.sdcran_scan(ev.sdcran_derivative(f), 0.0, lo, hi)
            return RootScan([r for r in scan.roots if r != 0.0], scan.accumulation, scan.unresolved)
        if isinstance(f, ExampleOneFn):
            return RootScan([])
        if isinstance(f, CompositionFn):
            inner = self.critical_points(f.inner, lo, hi)
            roots = list(inner.roots)
            outer_deriv = np.polynomial.Polynomial(f.outer.coefficients).deriv()
            if outer_deriv.degree() >= 1:
                for t in self.polynomial_roots(list(outer_deriv.coef), 0.0, -math.inf, math.inf):
                    roots.extend(r for r in self.scan(f.inner, t, lo, hi).roots if r != 0.0)
            return RootScan(_dedupe(roots, 10 * self.config.root_xtol), inner.accumulation, inner.unresolved)

        def fun(x):
            return ev.eval(f, x, order=1)

        def dfun(x):
            return ev.eval(f, x, order=2)

        return RootScan(self.grid_scan(fun, dfun, lo, hi))


# ---------------------------------------------------------------------------
# 曲線の幾何
# ---------------------------------------------------------------------------

def rotation_matrix(theta: float) -> List[List[float]]:
    """原点まわりの回転"""
    c, s = math.cos(theta), math.sin(theta)
    return [[c, -s], [s, c]]


SWAP_MATRIX = [[0.0, 1.0], [1.0, 0.0]]


class CurveGeometry:
    """平面曲線の陰関数・勾配・パラメータ表示"""

    def __init__(self, evaluator: FunctionEvaluator):
        self.evaluator = evaluator

    @staticmethod
    def flatten(curve: PlaneCurve) -> Tuple[PlaneCurve, np.ndarray, np.ndarray]:
        """入れ子の Transformed を一つのアフィン写像にまとめる"""
        A = np.eye(2)
        b = np.zeros(2)
        while isinstance(curve, Transformed):
            M = np.asarray(curve.matrix, dtype=float)
            t = np.asarray(curve.translation, dtype=float)
            A, b = A @ M, A @ t + b
            curve = curve.base
        return curve, A, b

    @staticmethod
    def chain_offset(chain: ParabolaChain, x2: np.ndarray) -> np.ndarray:
        """最も近い格子点からの符号付き距離 d"""
        shifted = x2 - chain.offset
        return shifted - chain.period * np.round(shifted / chain.period)

    def base_height(self, curve: PlaneCurve, x2: ArrayLike) -> np.ndarray:
        """グラフ型曲線の x1 = h(x2)"""
        x2 = np.asarray(x2, dtype=float)
        if isinstance(curve, ParabolaChain):
            d = self.chain_offset(curve, x2)
            return curve.vertex + curve.sign * d * d
        if isinstance(curve, FnGraph):
            return np.asarray(self.evaluator.eval(curve.f, x2))
        raise TypeError("not a graph-type curve")

    def base_height_derivative(self, curve: PlaneCurve, x2: ArrayLike) -> np.ndarray:
        x2 = np.asarray(x2, dtype=float)
        if isinstance(curve, ParabolaChain):
            return 2.0 * curve.sign * self.chain_offset(curve, x2)
        if isinstance(curve, FnGraph):
            return np.asarray(self.evaluator.eval(curve.f, x2, order=1))
        raise TypeError("not a graph-type curve")

    def implicit(self, curve: PlaneCurve, x1: ArrayLike, x2: ArrayLike) -> np.ndarray:
        """曲線の定義関数（グラフ型は x1 - h(x2)、円は level - x1² - x2²）"""
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        if isinstance(curve, Circle):
            return curve.level - x1 * x1 - x2 * x2
        if isinstance(curve, (ParabolaChain, FnGraph)):
            return x1 - self.base_height(curve, x2)
        base, A, b = self.flatten(curve)
        xi1, xi2 = self._inverse(A, b, x1, x2)
        return self.implicit(base, xi1, xi2)

    def gradient(self, curve: PlaneCurve, x1: ArrayLike, x2: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        if isinstance(curve, Circle):
            return -2.0 * x1, -2.0 * x2
        if isinstance(curve, (ParabolaChain, FnGraph)):
            return np.ones_like(x1 + x2), -self.base_height_derivative(curve, x2) + 0.0 * x1
        base, A, b = self.flatten(curve)
        xi1, xi2 = self._inverse(A, b, x1, x2)
        g1, g2 = self.gradient(base, xi1, xi2)
        inv_t = np.linalg.inv(A).T
        return inv_t[0, 0] * g1 + inv_t[0, 1] * g2, inv_t[1, 0] * g1 + inv_t[1, 1] * g2

    @staticmethod
    def _inverse(A: np.ndarray, b: np.ndarray, x1: np.ndarray, x2: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        inv = np.linalg.inv(A)
        d1, d2 = x1 - b[0], x2 - b[1]
        return inv[0, 0] * d1 + inv[0, 1] * d2, inv[1, 0] * d1 + inv[1, 1] * d2

    def point(self, curve: PlaneCurve, p: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
        """パラメータ p の平面点（円は角度、グラフ型は x2）"""
        p = np.asarray(p, dtype=float)
        if isinstance(curve, Circle):
            return curve.radius * np.cos(p), curve.radius * np.sin(p)
        if isinstance(curve, (ParabolaChain, FnGraph)):
            return self.base_height(curve, p), p
        base, A, b = self.flatten(curve)
        X1, X2 = self.point(base, p)
        return A[0, 0] * X1 + A[0, 1] * X2 + b[0], A[1, 0] * X1 + A[1, 1] * X2 + b[1]

    def param_window(self, curve: PlaneCurve, window: Window) -> Tuple[float, float]:
        """窓を覆うパラメータ範囲"""
        if isinstance(curve, Circle):
            return (0.0, 2.0 * math.pi)
        if isinstance(curve, (ParabolaChain, FnGraph)):
            return window.x2
        base, A, b = self.flatten(curve)
        if isinstance(base, Circle):
            return (0.0, 2.0 * math.pi)
        corners = np.array([[window.x1[i], window.x2[j]] for i in (0, 1) for j in (0, 1)])
        _, xi2 = self._inverse(A, b, corners[:, 0], corners[:, 1])
        return (float(xi2.min()), float(xi2.max()))

    def gap_points(self, curve: PlaneCurve) -> List[Tuple[float, float, float]]:
        """解析性の欠損点 (param, x1, x2)"""
        base, A, b = self.flatten(curve)
        if not isinstance(base, FnGraph):
            return []
        out = []
        for g in self.evaluator.classify(base.f).analyticity_gap:
            X1, X2 = self.point(curve, g)
            out.append((g, float(X1), float(X2)))
        return out

    def gap_distance(self, curve: PlaneCurve, x1: float, x2: float) -> float:
        """定義関数が非解析になる直線までの距離（基底座標）"""
        base, A, b = self.flatten(curve)
        if not isinstance(base, FnGraph):
            return math.inf
        gaps = self.evaluator.classify(base.f).analyticity_gap
        if not gaps:
            return math.inf
        _, xi2 = self._inverse(A, b, np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
        return float(min(abs(float(xi2) - g) for g in gaps))

    @staticmethod
    def transform(curve: PlaneCurve, matrix: List[List[float]], translation: Optional[List[float]] = None) -> Transformed:
        return Transformed(base=curve, matrix=matrix, translation=translation or [0.0, 0.0])

    def map_point(self, curve: Transformed, point: Tuple[float, float]) -> Tuple[float, float]:
        _, A, b = self.flatten(curve)
        v = A @ np.asarray(point, dtype=float) + b
        return float(v[0]), float(v[1])

    def inverse_map_point(self, curve: Transformed, point: Tuple[float, float]) -> Tuple[float, float]:
        _, A, b = self.flatten(curve)
        xi1, xi2 = self._inverse(A, b, np.asarray(point[0], dtype=float), np.asarray(point[1], dtype=float))
        return float(xi1), float(xi2)


# ---------------------------------------------------------------------------
# サービス
# ---------------------------------------------------------------------------

class CurveKitService:
    """関数族と曲線の計算サービス"""

    def __init__(self):
        self.config = get_numerics_config()
        self.evaluator = FunctionEvaluator(self.config)
        self.roots = RootFinder(self.evaluator, self.config)
        self.geometry = CurveGeometry(self.evaluator)

    # --- 評価 ---------------------------------------------------------

    def eval(self, f: Fn1D, x: ArrayLike) -> ArrayLike:
        """f(x)"""
        return self.evaluator.eval(f, x)

    def eval_mp(self, f: Fn1D, x, dps: int = 60):
        return self.evaluator.eval_mp(f, x, dps)

    def derivative(self, f: SDCRAnFn) -> SDCRAnFn:
        """S-D-CRAn 族内の導関数"""
        return self.evaluator.sdcran_derivative(f)

    def classify(self, f: Fn1D) -> FnClassification:
        return self.evaluator.classify(f)

    # --- 平坦性 -------------------------------------------------------

    def flatness_certificate(self, f: Fn1D, max_order: int = 4, tol: float = 1e-8) -> FlatnessReport:
        """x_k = ±2^{-k} (k = 4..40) 上で |f^(j)(x_k)| → 0 を確かめる"""
        start = time.time()
        if max_order > 6:
            raise ValueError("max_order must not exceed 6")
        if 0.0 not in self.classify(f).analyticity_gap:
            logger.warning("Flatness requested at a point where the function is analytic", kind=f.kind)

        ks = np.arange(4, 41)
        xs = 2.0 ** (-ks.astype(float))
        jets_pos = self.evaluator.jets(f, xs, max_order)
        jets_neg = self.evaluator.jets(f, -xs, max_order)

        first_passing: List[Optional[int]] = []
        report = FlatnessReport(passed=True, max_order=max_order, tol=tol)
        for j in range(1, max_order + 1):
            mags = np.maximum(np.abs(jets_pos[j]), np.abs(jets_neg[j]))
            bad = np.nonzero(mags >= tol)[0]
            if bad.size == 0:
                first_passing.append(int(ks[0]))
                continue
            last_bad = bad[-1]
            if last_bad == len(ks) - 1:
                first_passing.append(None)
                if report.passed:
                    report.passed = False
                    report.violating_order = j
                    report.violating_point = float(xs[last_bad])
                    report.violating_value = float(mags[last_bad])
            else:
                first_passing.append(int(ks[last_bad + 1]))
        report.first_passing_index = first_passing

        logger.numeric_operation(
            "flatness_certificate",
            duration_ms=(time.time() - start) * 1000,
            passed=report.passed,
            max_order=max_order,
            violating_order=report.violating_order,
        )
        return report

    def flatness_envelope(self, f: SDCRAnFn, order: int, grid: Optional[np.ndarray] = None) -> float:
        """|f^(j)(x)| ≤ C·e^{-1/(2x²)} を満たす C の格子上の推定"""
        if grid is None:
            grid = 0.1 * 2.0 ** (-np.arange(0, 12, 0.25))
        u = 1.0 / np.asarray(grid, dtype=float)
        spec = self.evaluator.sdcran_derivatives(f, order)[order]
        ratio = np.abs(spec.R) * np.exp(-0.5 * u * u) * np.abs(self.evaluator.sdcran_factor(spec, u))
        return float(np.max(ratio))

    # --- 根と極値 -----------------------------------------------------

    def roots_in_interval(
        self,
        f: Fn1D,
        target: float,
        bracket: Tuple[float, float],
        tol: Optional[float] = None,
        density: Optional[int] = None,
    ) -> List[float]:
        """f(x) = target の根（昇順）"""
        start = time.time()
        scan = self.roots.scan(f, target, bracket[0], bracket[1], density)
        if tol is None:
            tol = self.config.residual_tol
        roots = [r for r in scan.roots if self._residual_ok(f, r, target, tol)]
        logger.debug(
            "roots_in_interval",
            kind=f.kind,
            count=len(roots),
            accumulating=scan.accumulation is not None,
            duration_ms=(time.time() - start) * 1000,
        )
        return roots

    def scan_roots(self, f: Fn1D, target: float, bracket: Tuple[float, float], density: Optional[int] = None) -> RootScan:
        return self.roots.scan(f, target, bracket[0], bracket[1], density)

    def _residual_ok(self, f: Fn1D, r: float, target: float, tol: float) -> bool:
        value = self.eval(f, r)
        if abs(value - target) < tol:
            return True
        slope = abs(self.evaluator.eval(f, r, order=1))
        return abs(value - target) <= slope * 10 * self.config.root_xtol + tol

    def vertical_tangents(
        self,
        curve: PlaneCurve,
        window: Optional[Tuple[float, float]] = None,
        tol: Optional[float] = None,
    ) -> List[Tangency]:
        """dx1/dp の符号変化点（x1 の極大・極小）"""
        base, A, b = self.geometry.flatten(curve)
        a11, a12 = float(A[0, 0]), float(A[0, 1])
        if window is None:
            window = (0.0, 2.0 * math.pi) if isinstance(base, Circle) else (-10.0, 10.0)
        lo, hi = window
        params: List[Tuple[float, str]] = []

        if isinstance(base, Circle):
            # x1(φ) = ρ(a11 cos φ + a12 sin φ) + b1
            phi = math.atan2(a12, a11)
            for cand, kind in ((phi, "max"), (phi + math.pi, "min")):
                for shift in (-2.0 * math.pi, 0.0, 2.0 * math.pi):
                    if lo <= cand + shift < hi:
                        params.append((cand + shift, kind))
        elif isinstance(base, ParabolaChain):
            params.extend(self._chain_tangents(base, a11, a12, lo, hi))
        elif isinstance(base, FnGraph):
            if base.is_level_line and a12 == 0.0:
                return []
            params.extend(self._graph_tangents(curve, base, a11, a12, lo, hi))

        out = []
        for p, kind in sorted(params):
            X1, X2 = self.geometry.point(curve, p)
            out.append(Tangency(param=float(p), x1=float(X1), x2=float(X2), kind=kind))
        return out

    @staticmethod
    def _chain_tangents(chain: ParabolaChain, a11: float, a12: float, lo: float, hi: float) -> List[Tuple[float, str]]:
        # x1 = a11 (vertex + sign d²) + a12 p、頂点と折れ目ごとに閉形式
        half = chain.period / 2.0
        out = []
        j_lo = math.floor((lo - chain.offset) / chain.period) - 1
        j_hi = math.ceil((hi - chain.offset) / chain.period) + 1
        curvature = a11 * chain.sign
        for j in range(j_lo, j_hi + 1):
            center = chain.offset + chain.period * j
            if curvature != 0.0:
                d = -a12 / (2.0 * curvature)
                if abs(d) < half and lo < center + d < hi:
                    out.append((center + d, "min" if curvature > 0 else "max"))
            kink = center + half
            # 折れ目では片側微分 a11·(±sign·period) + a12 の符号が変わる
            left = a11 * chain.sign * chain.period + a12
            right = -a11 * chain.sign * chain.period + a12
            if left * right < 0 and lo < kink < hi:
                out.append((kink, "max" if left > 0 else "min"))
        return out

    def _graph_tangents(
        self, curve: PlaneCurve, base: FnGraph, a11: float, a12: float, lo: float, hi: float
    ) -> List[Tuple[float, str]]:
        f = base.f
        ev = self.evaluator
        margin = 1e-9 * max(1.0, abs(lo), abs(hi))
        lo, hi = lo + margin, hi - margin
        if a12 == 0.0:
            scan = self.roots.critical_points(f, lo, hi)
            if scan.accumulation is not None:
                focus = self.geometry.point(curve, scan.accumulation)
                heights = [float(self.geometry.point(curve, r)[0]) for r in scan.roots]
                logger.warning("Vertical tangents accumulate", focus=[float(focus[0]), float(focus[1])], count=len(heights))
                raise ReebscapeErrors.accumulation((float(focus[0]), float(focus[1])), heights, "vertical_tangents")
            candidates = [r for r in scan.roots if lo < r < hi]

            def slope_sign(p: float) -> int:
                return int(np.sign(a11)) * ev.derivative_sign(f, p)
        else:
            def fun(p):
                return a11 * ev.eval(f, p, order=1) + a12

            def dfun(p):
                return a11 * ev.eval(f, p, order=2)

            try:
                candidates = [r for r in self.roots.grid_scan(fun, dfun, lo, hi, touch_scale=abs(a12)) if lo < r < hi]
            except TooOscillatory:
                gaps = self.geometry.gap_points(curve)
                if gaps:
                    _, g1, g2 = gaps[0]
                    raise ReebscapeErrors.accumulation((g1, g2), [], "vertical_tangents")
                raise

            def slope_sign(p: float) -> int:
                return int(np.sign(fun(np.array([p]))[0]))

        out = []
        for k, r in enumerate(candidates):
            gaps = [abs(r - o) for o in candidates if o != r]
            eta = min([1e-6 * max(1.0, abs(r))] + [0.25 * g for g in gaps]) if gaps else 1e-6 * max(1.0, abs(r))
            eta = min(eta, 0.25 * r * r) if r != 0.0 else eta
            left, right = slope_sign(r - eta), slope_sign(r + eta)
            if left > 0 > right:
                out.append((r, "max"))
            elif left < 0 < right:
                out.append((r, "min"))
        return out

    def sup_abs_derivative(self, f: Fn1D, window: Tuple[float, float], density: int = 100_000) -> float:
        """格子上の max |f'| の 2 倍"""
        xs = np.linspace(window[0], window[1], density)
        slope = np.abs(self.evaluator.eval(f, xs, order=1))
        estimate = 2.0 * float(np.max(slope)) if slope.size else 0.0
        logger.numeric_operation("sup_abs_derivative", estimate=estimate, density=density)
        return estimate

    # --- 構成 ---------------------------------------------------------

    @staticmethod
    def blended_parabola_chain(center: float, sign: int, vertex: float, period: float = 4.0) -> PiecewiseBlendFn:
        """一周期分の c_S：放物線片を |x2 - center| ≤ 3/2 で厳密に保ち、外側を定数 ±2 に平坦接続"""
        parabola = PolynomialFn(coefficients=[vertex + sign * center * center, -2.0 * sign * center, float(sign)])
        plateau = PolynomialFn(coefficients=[2.0 * sign])
        half = period / 2.0
        return PiecewiseBlendFn(pieces=[
            BlendPiece(lo=center - half, hi=center - 1.9, fn=plateau),
            BlendPiece(lo=center - 1.5, hi=center + 1.5, fn=parabola),
            BlendPiece(lo=center + 1.9, hi=center + half, fn=plateau),
        ])

    @staticmethod
    def oscillating_profile(R0: float, R: float) -> CompositionFn:
        """c0 = p_{0,R0} ∘ c、p(t) = t(R0 - t)、c = R e^{-1/x²} sin²(1/x)"""
        return CompositionFn(
            outer=PolynomialFn(coefficients=[0.0, R0, -1.0]),
            inner=SDCRAnFn.flat_sine_square(R),
        )


# グローバルサービスインスタンス
curvekit_service = CurveKitService()
