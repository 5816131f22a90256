"""
懸垂写像の検証サービスのテスト
"""

import numpy as np
import pytest

from shared.models.curves import Circle, Constraint, FnGraph, Window
from shared.models.lift import SuspensionMap
from backend.src.services.liftcheck import liftcheck_service
from backend.src.services.scenario_service import scenario_service
from backend.src.core.errors import GapPoint


@pytest.fixture(scope="module")
def thm1_map(thm1_region):
    return scenario_service.thm1_suspension(thm1_region, 1, 1)


@pytest.fixture(scope="module")
def disk_map(disk_build):
    return disk_build.suspension


@pytest.fixture(scope="module")
def tangent_map():
    """f1 = f2 = 1 - x1² - x2²（y = 0 でヤコビアンが退化する）"""
    disk = Constraint(curve=Circle(level=1.0), side=1)
    return SuspensionMap(name="tangent", f1_factors=[disk], f2_factors=[disk],
                         window=Window(x1=(-1.2, 1.2), x2=(-1.2, 1.2)))


class TestEvaluation:
    """写像の評価のテスト"""

    def setup_method(self):
        self.lift = liftcheck_service

    def test_zero_on_the_suspension(self, thm1_map):
        assert self.lift.eval_map(thm1_map, (0.0, 1.0, 0.5, 1.0)) == pytest.approx((0.0, 0.0), abs=1e-15)

    def test_value_off_the_region(self, thm1_map):
        # c_S1(0) = -1/2, c_S2(0) = 1/2 - 4
        assert self.lift.eval_map(thm1_map, (0.0, 0.0, 0.0, 1.0)) == pytest.approx((-1.75, 0.0))

    def test_dimension_mismatch(self, thm1_map):
        with pytest.raises(ValueError):
            self.lift.eval_map(thm1_map, (0.0, 1.0, 0.5))

    def test_higher_dimensional_blocks(self, thm1_region):
        smap = scenario_service.thm1_suspension(thm1_region, 2, 3)
        assert smap.dimension == 7
        assert self.lift.eval_map(smap, (0.0, 1.0, 0.3, 0.4, 0.0, 0.6, 0.8)) == pytest.approx((0.0, 0.0), abs=1e-15)


class TestSampling:
    """零点集合の標本化のテスト"""

    def setup_method(self):
        self.lift = liftcheck_service

    def test_empty_request(self, disk_map):
        out = self.lift.sample_zero_set(disk_map, 0)
        assert out.shape == (0, disk_map.dimension)

    def test_samples_lie_on_zero_set(self, thm1_map):
        points = self.lift.sample_zero_set(thm1_map, 200, seed=5)
        assert points.shape == (200, 4)
        residual = max(max(abs(v) for v in self.lift.eval_map(thm1_map, p)) for p in points)
        assert residual < 1e-10

    def test_seed_is_deterministic(self, disk_map):
        a = self.lift.sample_zero_set(disk_map, 50, seed=11)
        b = self.lift.sample_zero_set(disk_map, 50, seed=11)
        assert np.array_equal(a, b)

    def test_partitions_keep_count(self, disk_map):
        points = self.lift.sample_zero_set(disk_map, 101, seed=3, partitions=4)
        assert points.shape == (101, disk_map.dimension)

    def test_case1_samples_stay_right_of_profile(self, case1_build):
        points = self.lift.sample_zero_set(case1_build.suspension, 300, seed=1)
        assert np.all(points[:, 0] >= 0.0)


class TestRank:
    """ヤコビアンのランク検査のテスト"""

    def setup_method(self):
        self.lift = liftcheck_service

    def test_disk_samples_have_full_rank(self, disk_map):
        points = self.lift.sample_zero_set(disk_map, 100, seed=2)
        report = self.lift.rank_report(disk_map, points)
        assert report.passed
        assert report.pass_count == 100
        assert report.max_residual < 1e-10

    def test_thm1_samples_have_full_rank(self, thm1_map):
        points = self.lift.sample_zero_set(thm1_map, 100, seed=4)
        report = self.lift.rank_report(thm1_map, points)
        assert report.passed
        assert report.pass_count + report.skipped_near_gap == 100

    def test_parallel_gradients_drop_rank(self, tangent_map):
        result = self.lift.jacobian_rank(tangent_map, (0.5, 0.0, 0.0, 0.0))
        assert result.rank <= 1

    def test_rank_of_dependent_rows(self):
        jac = np.array([[1.0, 2.0, 0.0, 0.0], [2.0, 4.0, 0.0, 0.0]])
        assert self.lift.rank_of(jac).rank == 1

    def test_gradient_agrees_with_products(self, disk_map, thm1_map):
        for smap, seed in ((disk_map, 6), (thm1_map, 7)):
            points = self.lift.sample_zero_set(smap, 40, seed=seed)
            assert self.lift.gradient_check(smap, points) < 1e-5

    def test_strict_probe_across_gap(self, case1_build):
        smap = case1_build.suspension
        point = (0.5, 0.0, 0.0, 0.0)
        with pytest.raises(GapPoint):
            self.lift.numeric_jacobian(smap, point, strict=True)
        _, shifted = self.lift.numeric_jacobian(smap, point)
        assert shifted


class TestProjectionCounts:
    """座標射影の臨界等高線のテスト"""

    def setup_method(self):
        self.lift = liftcheck_service

    @pytest.mark.parametrize("axis", [0, 1])
    def test_disk_has_two_critical_contours(self, disk_map, axis):
        report = self.lift.projection_critical_count(disk_map, axis)
        assert report.count == 2
        assert report.heights == pytest.approx([-1.0, 1.0])

    def test_thm1_counts_one_period(self, thm1_map):
        report = self.lift.projection_critical_count(thm1_map, 0, period=4.0)
        assert report.count == 2
        assert report.heights == pytest.approx([-0.5, 0.5])
        assert report.end_count == 2

    def test_invalid_axis(self, disk_map):
        with pytest.raises(ValueError):
            self.lift.projection_critical_count(disk_map, 2)

    def test_level_line_suspension(self, disk_region):
        positive = Constraint(curve=FnGraph.level_line(-2.0), side=1)
        smap = SuspensionMap(f1_factors=disk_region.constraints, f2_factors=[positive], window=disk_region.window)
        assert self.lift.eval_map(smap, (0.0, 0.0, 1.0, 2.0 ** 0.5)) == pytest.approx((0.0, 0.0), abs=1e-15)
