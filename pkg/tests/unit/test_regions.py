"""
平面領域サービスのテスト
"""

import math

import numpy as np
import pytest

from shared.models.curves import Circle, Constraint, FnGraph, PlanarRegion, Window
from backend.src.services.regions import region_service
from backend.src.core.errors import AccumulationSuspected


def near_lattice(x: float, offsets, period: float, tol: float = 1e-9) -> bool:
    """x が offsets + period·Z のどれかに近いか"""
    return any(abs((x - o) / period - round((x - o) / period)) * period < tol for o in offsets)


class TestSlice:
    """スライス計算のテスト"""

    def setup_method(self):
        self.regions = region_service

    def test_middle_height_has_one_interval_per_half_period(self, thm1_region):
        s = self.regions.slice(thm1_region, 0.0)
        assert s.count == 6
        r = 1.0 / math.sqrt(2.0)
        for iv in s.intervals:
            assert near_lattice(iv.lo, [r], 2.0)
            assert near_lattice(iv.hi, [-r], 2.0)
            assert not iv.truncated
        assert s.intervals[0].lo == pytest.approx(-6.0 + r)

    def test_upper_height_endpoints(self, thm1_region):
        s = self.regions.slice(thm1_region, 0.9)
        r = math.sqrt(1.4)
        inner = [iv for iv in s.intervals if not iv.truncated]
        assert len(inner) == 2
        for iv in inner:
            assert near_lattice(iv.lo, [r], 4.0)
            assert near_lattice(iv.hi, [-r], 4.0)
        assert s.intervals[0].lo_truncated and s.intervals[0].lo == -6.0
        assert s.intervals[-1].hi_truncated and s.intervals[-1].hi == 6.0

    def test_slice_above_strip_is_empty(self, thm1_region):
        assert self.regions.slice(thm1_region, 1.5).intervals == []

    def test_height_outside_window(self, thm1_region):
        with pytest.raises(ValueError):
            self.regions.slice(thm1_region, 2.0)

    def test_intervals_are_sorted_and_disjoint(self, thm1_region):
        for h in (-0.95, -0.3, 0.2, 0.75):
            ivs = self.regions.slice(thm1_region, h).intervals
            for left, right in zip(ivs, ivs[1:]):
                assert left.hi < right.lo

    def test_level_line_bottom_slice(self, thm1_region):
        s = self.regions.slice(thm1_region, -1.0)
        r = math.sqrt(1.5)
        assert s.count == 3
        for iv in s.intervals:
            assert near_lattice(iv.lo, [2.0 + r], 4.0)
            assert near_lattice(iv.hi, [2.0 - r], 4.0)

    def test_disk(self, disk_region):
        s = self.regions.slice(disk_region, 0.6)
        assert s.count == 1
        assert (s.intervals[0].lo, s.intervals[0].hi) == pytest.approx((-0.8, 0.8))

    def test_disk_tangent_height_is_degenerate(self, disk_region):
        s = self.regions.slice(disk_region, 1.0)
        assert s.count == 0
        assert s.degenerate_points == pytest.approx([0.0])

    def test_periodicity(self, thm1_region):
        for h in (-0.8, 0.0, 0.7):
            ivs = [iv for iv in self.regions.slice(thm1_region, h).intervals if not iv.truncated]
            for iv in ivs:
                if iv.hi + 4.0 <= 6.0:
                    assert any(
                        abs(o.lo - iv.lo - 4.0) < 1e-9 and abs(o.hi - iv.hi - 4.0) < 1e-9 for o in ivs
                    )

    @pytest.mark.parametrize("index", [0, 1, 2, 3])
    def test_removing_a_constraint_never_shrinks(self, thm1_region, index):
        reduced = thm1_region.without(index)
        for h in (-0.9, -0.2, 0.4, 0.95):
            full = self.regions.slice(thm1_region, h)
            wider = self.regions.slice(reduced, h)
            for iv in full.intervals:
                assert any(o.lo - 1e-9 <= iv.lo and iv.hi <= o.hi + 1e-9 for o in wider.intervals)

    @pytest.mark.parametrize("name", ["thm1_region", "disk_region"])
    def test_endpoint_residuals(self, name, request):
        region = request.getfixturevalue(name)
        rng = np.random.default_rng(11)
        lo, hi = region.window.x1
        for h in rng.uniform(lo, hi, 50):
            for iv in self.regions.slice(region, float(h)).intervals:
                for x2, source, truncated in ((iv.lo, iv.lo_source, iv.lo_truncated),
                                              (iv.hi, iv.hi_source, iv.hi_truncated)):
                    if truncated:
                        continue
                    g = float(self.regions.constraint_value(region.constraints[source], float(h), x2))
                    assert abs(g) < 1e-9

    @pytest.mark.parametrize("name", ["thm1_region", "disk_region"])
    def test_agrees_with_rasterized_membership(self, name, request):
        region = request.getfixturevalue(name)
        rng = np.random.default_rng(5)
        x2s = np.linspace(region.window.x2[0], region.window.x2[1], 10_000)
        band = 1e-7
        for h in rng.uniform(region.window.x1[0], region.window.x1[1], 20):
            h = float(h)
            s = self.regions.slice(region, h)
            inside = np.ones(x2s.shape, dtype=bool)
            for c in region.constraints:
                g = np.broadcast_to(np.asarray(self.regions.constraint_value(c, h, x2s), dtype=float), x2s.shape)
                inside &= g >= 0.0
            ends = np.array([e for iv in s.intervals for e in (iv.lo, iv.hi)] or [np.inf])
            for x2, member in zip(x2s, inside):
                if member != s.covers(float(x2)):
                    assert np.min(np.abs(ends - x2)) <= band


class TestContains:
    """所属判定のテスト"""

    def setup_method(self):
        self.regions = region_service

    def test_thm1_points(self, thm1_region):
        assert self.regions.contains(thm1_region, (0.0, 1.0))
        assert not self.regions.contains(thm1_region, (0.0, 0.0))

    def test_outside_window(self, disk_region):
        assert not self.regions.contains(disk_region, (0.0, 2.0))

    def test_boundary_within_tolerance(self, disk_region):
        assert self.regions.contains(disk_region, (1.0 + 1e-12, 0.0))
        assert not self.regions.contains(disk_region, (1.0 + 1e-6, 0.0))


class TestBoundaryEvents:
    """境界事象のテスト"""

    def setup_method(self):
        self.regions = region_service

    def test_thm1_events(self, thm1_region):
        events = self.regions.boundary_events(thm1_region)
        assert [e.height for e in events] == pytest.approx([-1.0, -0.5, 0.5, 1.0])
        assert [e.tag for e in events] == ["end", "vertex-tangency", "vertex-tangency", "end"]

    def test_thm1_tangency_witnesses(self, thm1_region):
        events = self.regions.boundary_events(thm1_region)
        split, merge = events[1], events[2]
        assert sorted(split.witnesses) == pytest.approx([-4.0, 0.0, 4.0], abs=1e-9)
        assert sorted(merge.witnesses) == pytest.approx([-2.0, 2.0], abs=1e-9)

    def test_disk_events(self, disk_region):
        events = self.regions.boundary_events(disk_region)
        assert [e.height for e in events] == pytest.approx([-1.0, 1.0])

    def test_accumulating_tangencies(self, case1_build):
        with pytest.raises(AccumulationSuspected) as exc_info:
            self.regions.boundary_events(case1_build.region)
        assert exc_info.value.focus == pytest.approx((0.0, 0.0))

    def test_rotated_curve_has_finitely_many_events(self, case3_build):
        events = self.regions.boundary_events(case3_build.region)
        heights = [e.height for e in events]
        assert heights == sorted(heights)
        assert 2 <= len(events) <= 6


class TestCorners:
    """角の検出のテスト"""

    def setup_method(self):
        self.regions = region_service

    def test_thm1_corners_lie_on_level_lines(self, thm1_region):
        corners = self.regions.corners(thm1_region)
        assert corners
        for x1, x2, i, j in corners:
            assert abs(abs(x1) - 1.0) < 1e-9
            assert {i, j} in ({0, 3}, {1, 2})

    def test_case1_corners_are_extreme_in_x2(self, case1_build):
        corners = self.regions.corners(case1_build.region)
        assert len(corners) == 2
        assert sorted(c[1] for c in corners) == pytest.approx([-1.0, 1.0], abs=1e-3)

    def test_disk_and_half_plane(self):
        region = PlanarRegion(
            name="half-disk",
            constraints=[
                Constraint(curve=Circle(level=1.0), side=1),
                Constraint(curve=FnGraph.level_line(0.0), side=1),
            ],
            window=Window(x1=(-1.2, 1.2), x2=(-1.2, 1.2)),
        )
        corners = self.regions.corners(region)
        assert sorted((round(a, 9), round(b, 9)) for a, b, _, _ in corners) == [(0.0, -1.0), (0.0, 1.0)]


class TestSwapAxes:
    """軸交換のテスト"""

    def test_swapped_disk_slice(self, disk_region):
        swapped = region_service.swap_axes(disk_region)
        s = region_service.slice(swapped, 0.6)
        assert (s.intervals[0].lo, s.intervals[0].hi) == pytest.approx((-0.8, 0.8))
