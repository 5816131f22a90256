"""
関数族・曲線サービスのテスト
"""

import math

import mpmath
import numpy as np
import pytest

from shared.models.functions import (
    PolynomialFn, SDCRAnFn, TrigTerm, CompositionFn, ExampleOneFn,
)
from shared.models.curves import ParabolaChain, FnGraph, Transformed, Circle
from backend.src.services.curvekit import curvekit_service, rotation_matrix
from backend.src.core.errors import TooOscillatory


def richardson(fun, x: float, h: float = 1e-3) -> float:
    """中心差分の Richardson 外挿"""
    def central(step):
        return (fun(x + step) - fun(x - step)) / (2.0 * step)
    return (4.0 * central(h / 2.0) - central(h)) / 3.0


class TestEvaluation:
    """評価のテスト"""

    def setup_method(self):
        self.kit = curvekit_service
        self.c = SDCRAnFn.flat_sine_square(1.0)

    def test_flat_point_is_exact_zero(self):
        assert self.kit.eval(self.c, 0.0) == 0.0

    def test_value_at_reciprocal_pi_vanishes(self):
        assert self.kit.eval(self.c, 1.0 / math.pi) == pytest.approx(0.0, abs=1e-30)

    def test_value_at_two_over_pi(self):
        assert self.kit.eval(self.c, 2.0 / math.pi) == pytest.approx(math.exp(-math.pi ** 2 / 4.0), rel=1e-12)

    def test_underflow_returns_zero_without_nan(self):
        xs = np.array([1e-3, -1e-3, 1e-200])
        values = self.kit.eval(self.c, xs)
        assert np.all(values == 0.0)
        assert not np.any(np.isnan(values))

    def test_composition_matches_outer_of_inner(self):
        comp = CompositionFn(outer=PolynomialFn(coefficients=[0.0, 1.0, -1.0]), inner=self.c)
        for x in (0.2, 0.5, 1.3):
            t = self.kit.eval(self.c, x)
            assert self.kit.eval(comp, x) == pytest.approx(t * (1.0 - t), rel=1e-14)

    def test_example_one(self):
        f = ExampleOneFn()
        assert self.kit.eval(f, -1.0) == 0.0
        assert self.kit.eval(f, 0.0) == 0.0
        assert self.kit.eval(f, 0.5) == pytest.approx(math.exp(-2.0))

    def test_arbitrary_precision_below_double_range(self):
        x = 0.03
        assert self.kit.eval(self.c, x) == 0.0
        value = self.kit.eval_mp(self.c, x)
        assert value > 0
        expected = -1.0 / (x * x) + 2.0 * math.log(abs(math.sin(1.0 / x)))
        assert float(mpmath.log(value)) == pytest.approx(expected, rel=1e-12)


class TestDerivative:
    """記号微分のテスト"""

    def setup_method(self):
        self.kit = curvekit_service

    def test_flat_bump_derivative_representation(self):
        d = self.kit.derivative(SDCRAnFn.flat_bump(1.0))
        assert isinstance(d, SDCRAnFn)
        assert d.j0 == 0
        assert d.terms == [TrigTerm(i=3, T=[[2.0]])]

    @pytest.mark.parametrize("x", [0.3, 0.7, 1.5])
    def test_flat_bump_derivative_against_differences(self, x):
        f = SDCRAnFn.flat_bump(1.0)
        d = self.kit.derivative(f)
        numeric = richardson(lambda t: self.kit.eval(f, t), x, h=1e-5)
        assert self.kit.eval(d, x) == pytest.approx(numeric, rel=1e-6)
        assert self.kit.eval(d, x) == pytest.approx(2.0 * math.exp(-1.0 / x ** 2) / x ** 3, rel=1e-12)

    def test_derivative_vanishes_at_flat_point(self, c0):
        assert self.kit.evaluator.eval(c0, 0.0, order=1) == 0.0
        d = self.kit.derivative(SDCRAnFn.flat_sine_square(0.01))
        assert self.kit.eval(d, 0.0) == 0.0

    def test_linearity_in_scale(self):
        f = SDCRAnFn.flat_sine_square(1.0)
        g = SDCRAnFn.flat_sine_square(2.0)
        assert self.kit.eval(self.kit.derivative(g), 0.5) == pytest.approx(
            2.0 * self.kit.eval(self.kit.derivative(f), 0.5), rel=1e-14
        )

    @pytest.mark.parametrize("spec", [
        SDCRAnFn.flat_sine_square(1.0),
        SDCRAnFn(R=-0.5, j0=1, terms=[TrigTerm(i=0, T=[[0.0, 1.0], [1.0, 0.0]]), TrigTerm(i=2, T=[[1.0]])]),
    ])
    def test_family_closure_against_richardson(self, spec):
        rng = np.random.default_rng(7)
        xs = rng.uniform(0.2, 2.0, 20)
        chain = self.kit.evaluator.sdcran_derivatives(spec, 4)
        for k in range(1, 5):
            assert isinstance(chain[k], SDCRAnFn)
            assert all(t.i >= 0 for t in chain[k].terms)
            exact = np.array([self.kit.eval(chain[k], x) for x in xs])
            numeric = np.array([richardson(lambda t: self.kit.eval(chain[k - 1], t), x) for x in xs])
            scale = max(1.0, float(np.max(np.abs(exact))))
            assert np.max(np.abs(exact - numeric)) <= 1e-5 * scale


class TestFlatness:
    """平坦性証明のテスト"""

    def setup_method(self):
        self.kit = curvekit_service

    def test_sine_square_passes_to_order_four(self):
        report = self.kit.flatness_certificate(SDCRAnFn.flat_sine_square(1.0), max_order=4, tol=1e-8)
        assert report.passed
        assert len(report.first_passing_index) == 4
        assert all(k is not None for k in report.first_passing_index)

    def test_example_one_passes(self):
        report = self.kit.flatness_certificate(ExampleOneFn(), max_order=3, tol=1e-8)
        assert report.passed

    def test_polynomial_fails_at_second_order(self):
        report = self.kit.flatness_certificate(PolynomialFn(coefficients=[0.0, 0.0, 1.0]), max_order=2, tol=1e-8)
        assert not report.passed
        assert report.violating_order == 2
        assert report.violating_value == pytest.approx(2.0)

    def test_order_limit(self):
        with pytest.raises(ValueError):
            self.kit.flatness_certificate(SDCRAnFn.flat_bump(), max_order=7)

    @pytest.mark.parametrize("order", [0, 1, 2, 3, 4])
    def test_envelope_is_bounded(self, order):
        C = self.kit.flatness_envelope(SDCRAnFn.flat_sine_square(1.0), order)
        assert math.isfinite(C)
        assert C >= 0.0


class TestClassification:
    """解析性分類のテスト"""

    def setup_method(self):
        self.kit = curvekit_service

    def test_flags_per_family(self, c0):
        poly = self.kit.classify(PolynomialFn(coefficients=[1.0, 2.0]))
        assert poly.analyticity_gap == [] and poly.is_dran and poly.is_dcran

        sd = self.kit.classify(SDCRAnFn.flat_sine_square())
        assert sd.analyticity_gap == [0.0] and sd.is_dran and sd.is_dcran

        one = self.kit.classify(ExampleOneFn())
        assert one.analyticity_gap == [0.0] and one.is_dran and not one.is_dcran

        comp = self.kit.classify(c0)
        assert comp.analyticity_gap == [0.0] and comp.is_dcran

    def test_blend_gaps_are_window_endpoints(self):
        blend = self.kit.blended_parabola_chain(0.0, 1, -0.5)
        flags = self.kit.classify(blend)
        assert not flags.is_dcran
        assert flags.analyticity_gap == pytest.approx([-1.9, -1.5, 1.5, 1.9])


class TestBlendedChain:
    """ブレンドした c_S の構成のテスト"""

    def setup_method(self):
        self.kit = curvekit_service
        self.blend = self.kit.blended_parabola_chain(0.0, 1, -0.5)

    def test_matches_chain_on_parabola_window(self):
        xs = np.linspace(-1.5, 1.5, 301)
        chain = self.kit.geometry.base_height(ParabolaChain.s1(), xs)
        assert np.allclose(self.kit.eval(self.blend, xs), chain, atol=1e-14)
        assert self.kit.eval(self.blend, 1.5) == pytest.approx(1.75)

    def test_blend_zone_stays_outside_strip(self):
        xs = np.concatenate([np.linspace(1.5, 2.0, 200), np.linspace(-2.0, -1.5, 200)])
        assert np.all(self.kit.eval(self.blend, xs) > 1.0)

    def test_blend_is_smooth_across_window(self):
        jets = self.kit.evaluator.jets(self.blend, np.array([1.9 - 1e-9, 1.9 + 1e-9]), 2)
        assert np.allclose(jets[:, 0], jets[:, 1], atol=1e-5)


class TestRoots:
    """根の分離のテスト"""

    def setup_method(self):
        self.kit = curvekit_service

    def test_quadratic(self):
        roots = self.kit.roots_in_interval(PolynomialFn(coefficients=[-0.5, 0.0, 1.0]), 0.0, (-2.0, 2.0))
        assert roots == pytest.approx([-math.sqrt(0.5), math.sqrt(0.5)], abs=1e-12)

    def test_identity(self):
        assert self.kit.roots_in_interval(PolynomialFn(coefficients=[0.0, 1.0]), 0.0, (-1.0, 1.0)) == [0.0]

    def test_c0_zeros_are_reciprocal_multiples_of_pi(self, c0):
        eps = 1e-6
        roots = self.kit.roots_in_interval(c0, 0.0, (1.0 / (5.0 * math.pi) - eps, 1.0 / math.pi + eps))
        expected = sorted(1.0 / (k * math.pi) for k in range(1, 6))
        assert roots == pytest.approx(expected, rel=1e-9)

    def test_explicit_zero_tolerance_is_kept(self, monkeypatch):
        seen = []
        original = self.kit._residual_ok

        def spy(f, r, target, tol):
            seen.append(tol)
            return original(f, r, target, tol)

        monkeypatch.setattr(self.kit, "_residual_ok", spy)
        roots = self.kit.roots_in_interval(PolynomialFn(coefficients=[0.0, 1.0]), 0.0, (-1.0, 1.0), tol=0.0)
        assert roots == [0.0]
        assert seen == [0.0]

    def test_refinement_keeps_roots(self):
        f = PolynomialFn(coefficients=[0.0, -0.25, 0.0, 1.0])
        coarse = self.kit.roots_in_interval(f, 0.0, (-1.0, 1.0), density=64)
        fine = self.kit.roots_in_interval(f, 0.0, (-1.0, 1.0), density=128)
        for r in coarse:
            assert any(abs(r - s) < 1e-9 for s in fine)

    def test_unresolvable_oscillation(self):
        def fun(x):
            return np.sin(1.0 / x)

        with pytest.raises(TooOscillatory):
            self.kit.roots.grid_scan(fun, None, 1e-4, 1.0)


class TestVerticalTangents:
    """鉛直接線のテスト"""

    def setup_method(self):
        self.kit = curvekit_service

    def test_parabola_vertex(self):
        curve = FnGraph(f=PolynomialFn(coefficients=[-0.5, 0.0, 1.0]))
        tangents = self.kit.vertical_tangents(curve, (-2.0, 2.0))
        assert len(tangents) == 1
        assert tangents[0].param == pytest.approx(0.0, abs=1e-12)
        assert tangents[0].x1 == pytest.approx(-0.5)
        assert tangents[0].kind == "min"

    def test_chain_vertices(self):
        tangents = self.kit.vertical_tangents(ParabolaChain.s2(), (-6.0, 6.0))
        maxima = [t for t in tangents if t.kind == "max"]
        assert [t.x2 for t in maxima] == pytest.approx([-2.0, 2.0])
        assert all(t.x1 == pytest.approx(0.5) for t in maxima)

    def test_c0_between_consecutive_zeros(self, c0):
        tangents = self.kit.vertical_tangents(FnGraph(f=c0), (1.0 / (3.0 * math.pi), 1.0 / math.pi))
        assert [t.kind for t in tangents] == ["max", "min", "max"]
        # 内部の零点 1/(2π) は極小
        assert tangents[1].param == pytest.approx(1.0 / (2.0 * math.pi), rel=1e-9)
        assert 1.0 / (3.0 * math.pi) < tangents[0].param < 1.0 / (2.0 * math.pi) < tangents[2].param < 1.0 / math.pi

    def test_c0_close_pairs_are_separated(self, c0):
        # u = kπ と tan u = 1/u の根は間隔 1/(kπ) 程度まで近づく
        scan = self.kit.roots.critical_points(c0, 1.0 / (40.5 * math.pi), 1.0 / (20.5 * math.pi))
        assert scan.accumulation is None
        assert len(scan.roots) == 40
        zeros = [r for r in scan.roots if abs(math.sin(1.0 / r)) < 1e-8]
        assert len(zeros) == 20

    def test_c0_critical_points_accumulate_at_origin(self, c0):
        scan = self.kit.roots.critical_points(c0, -1.0, 1.0)
        assert scan.accumulation == 0.0
        assert len(scan.roots) >= 100

    def test_rotation_removes_tangencies(self, c0):
        theta = math.atan(2.0 * self.kit.sup_abs_derivative(c0, (-1.2, 1.2)))
        curve = Transformed(base=FnGraph(f=c0), matrix=rotation_matrix(theta))
        assert self.kit.vertical_tangents(curve, (0.05, 1.0 / math.pi)) == []

    def test_circle_extremes(self):
        tangents = self.kit.vertical_tangents(Circle(level=4.0))
        assert sorted(t.x1 for t in tangents) == pytest.approx([-2.0, 2.0])


class TestSupDerivative:
    """sup |f'| 推定のテスト"""

    def setup_method(self):
        self.kit = curvekit_service

    def test_square(self):
        estimate = self.kit.sup_abs_derivative(PolynomialFn(coefficients=[0.0, 0.0, 1.0]), (0.0, 1.0))
        assert 2.0 <= estimate <= 4.0

    def test_constant(self):
        assert self.kit.sup_abs_derivative(PolynomialFn(coefficients=[3.0]), (0.0, 1.0)) == 0.0

    def test_scales_with_amplitude(self):
        big = self.kit.sup_abs_derivative(self.kit.oscillating_profile(1.0, 0.01), (0.0, 1.0))
        small = self.kit.sup_abs_derivative(self.kit.oscillating_profile(1.0, 0.001), (0.0, 1.0))
        assert 0.0 < big < math.inf
        assert big / small == pytest.approx(10.0, rel=0.05)


class TestTransforms:
    """アフィン変換のテスト"""

    def setup_method(self):
        self.geometry = curvekit_service.geometry

    def test_round_trip_matches_base(self):
        A = np.array([[0.8, -0.3], [0.2, 1.1]])
        base = ParabolaChain.s1()
        there = Transformed(base=base, matrix=A.tolist(), translation=[0.4, -1.0])
        back = Transformed(
            base=there, matrix=np.linalg.inv(A).tolist(),
            translation=(-np.linalg.inv(A) @ np.array([0.4, -1.0])).tolist(),
        )
        rng = np.random.default_rng(3)
        x1 = rng.uniform(-1.0, 1.0, 100)
        x2 = rng.uniform(-3.0, 3.0, 100)
        assert np.allclose(self.geometry.implicit(back, x1, x2), self.geometry.implicit(base, x1, x2), atol=1e-12)

    def test_inverse_map_point(self):
        curve = Transformed(base=Circle(level=1.0), matrix=rotation_matrix(0.7), translation=[1.0, 2.0])
        p = (0.3, -0.4)
        assert self.geometry.inverse_map_point(curve, self.geometry.map_point(curve, p)) == pytest.approx(p, abs=1e-12)

    def test_nested_transforms_flatten(self):
        inner = Transformed(base=Circle(level=1.0), matrix=rotation_matrix(0.3))
        outer = Transformed(base=inner, matrix=rotation_matrix(0.4))
        base, A, b = self.geometry.flatten(outer)
        assert isinstance(base, Circle)
        assert np.allclose(A, rotation_matrix(0.7))
        assert np.allclose(b, 0.0)

    def test_gap_points_follow_transform(self, c0):
        curve = Transformed(base=FnGraph(f=c0), matrix=rotation_matrix(0.5), translation=[0.1, 0.0])
        gaps = self.geometry.gap_points(curve)
        assert len(gaps) == 1
        assert gaps[0][1:] == pytest.approx((0.1, 0.0), abs=1e-15)
