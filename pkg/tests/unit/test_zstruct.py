"""
Z 構造サービスのテスト
"""

import pytest

from shared.models.reeb import ReebGraph, NodeKind
from shared.models.zgraph import ZSpec, ZPoint, ZSegment, ZImage, ZImageArc
from backend.src.services.reebsweep import reeb_sweep_service
from backend.src.services.zstruct import zstruct_service, classical_vertices
from backend.src.services.scenario_service import scenario_service


@pytest.fixture(scope="module")
def disk_graph(disk_region):
    return reeb_sweep_service.build_reeb(disk_region)


@pytest.fixture(scope="module")
def case3_graph(case3_build):
    return reeb_sweep_service.build_reeb(case3_build.region)


@pytest.fixture
def reference():
    return scenario_service.thm1_reference_graph(4.0)


class TestProjection:
    """Z の像のテスト"""

    def setup_method(self):
        self.z = zstruct_service

    def test_empty_spec(self, disk_region, disk_graph):
        image = self.z.project_z(disk_region, ZSpec(), disk_graph)
        assert image.is_empty

    def test_horizontal_segment_is_an_arc(self, disk_region, disk_graph):
        spec = ZSpec(components=[ZSegment.horizontal(0.0, (-0.5, 0.5))])
        image = self.z.project_z(disk_region, spec, disk_graph)
        assert len(image.arcs) == 1
        assert image.arcs[0].heights == pytest.approx((-0.5, 0.5))

    def test_vertical_segment_collapses_to_a_point(self, disk_region, disk_graph):
        spec = ZSpec(components=[ZSegment(start=(0.2, -0.5), end=(0.2, 0.5))])
        image = self.z.project_z(disk_region, spec, disk_graph)
        assert image.arcs == []
        assert len(image.points) == 1
        assert image.points[0].height == pytest.approx(0.2)
        assert image.points[0].edge == disk_graph.edges[0].id

    def test_points_outside_region_are_ignored(self, disk_region, disk_graph):
        spec = ZSpec(components=[ZPoint(x1=0.0, x2=1.1)])
        assert self.z.project_z(disk_region, spec, disk_graph).is_empty

    def test_extreme_points_land_on_nodes(self, disk_region, disk_graph):
        spec = ZSpec(components=[ZPoint(x1=-1.0, x2=0.0), ZPoint(x1=1.0, x2=0.0)])
        image = self.z.project_z(disk_region, spec, disk_graph)
        nodes = {disk_graph.node(p.node).kind for p in image.points}
        assert nodes == {NodeKind.BIRTH, NodeKind.DEATH}


class TestZGraphDecision:
    """(R_c,Z)-グラフ判定のテスト"""

    def setup_method(self):
        self.z = zstruct_service

    def test_empty_image_leaves_endpoints_uncovered(self, disk_graph):
        verdict = self.z.decide_zgraph(disk_graph, ZImage())
        assert not verdict.defined
        assert verdict.reason == "uncovered-endpoint"

    def test_arc_blocks_graph_structure(self, disk_graph):
        image = ZImage(arcs=[ZImageArc(edge=disk_graph.edges[0].id, heights=(-0.5, 0.5))])
        verdict = self.z.decide_zgraph(disk_graph, image)
        assert not verdict.defined
        assert verdict.reason == "arc-in-image"
        assert verdict.to_json_dict()["zgraph"] == "undefined"

    def test_extremes_define_the_graph(self, disk_region, disk_graph):
        spec = ZSpec(components=[ZPoint(x1=-1.0, x2=0.0), ZPoint(x1=1.0, x2=0.0)])
        verdict = self.z.decide_zgraph(disk_graph, self.z.project_z(disk_region, spec, disk_graph))
        assert verdict.defined
        assert verdict.added_vertex_count == 0
        assert len(verdict.refined.edges) == 1

    def test_interior_point_adds_a_vertex(self, disk_region, disk_graph):
        spec = ZSpec(components=[
            ZPoint(x1=-1.0, x2=0.0), ZPoint(x1=0.3, x2=0.1), ZPoint(x1=1.0, x2=0.0),
        ])
        verdict = self.z.decide_zgraph(disk_graph, self.z.project_z(disk_region, spec, disk_graph))
        assert verdict.defined
        assert verdict.added_vertex_count == 1
        assert len(verdict.refined.nodes) == 3
        assert len(verdict.refined.edges) == 2
        assert verdict.refined.nodes_of_kind(NodeKind.Z_VERTEX)[0].height == pytest.approx(0.3)

    def test_decision_is_idempotent_on_refined_graph(self, case3_build, case3_graph):
        image = self.z.project_z(case3_build.region, case3_build.zspec, case3_graph)
        first = self.z.decide_zgraph(case3_graph, image)
        assert first.defined
        again = self.z.decide_zgraph(first.refined, image)
        assert again.defined
        assert len(again.refined.nodes) == len(first.refined.nodes)
        assert len(again.refined.edges) == len(first.refined.edges)
        assert self.z.iso_check(again.refined, first.refined, respect_heights=True)

    def test_periodic_quotient_without_z(self, reference):
        verdict = self.z.decide_zgraph(reference, ZImage())
        assert not verdict.defined
        assert verdict.reason == "uncovered-endpoint"


class TestRemark1:
    """Remark-1 型頂点集合のテスト"""

    def setup_method(self):
        self.z = zstruct_service

    def test_closed_strip_counts_ends(self, reference):
        vertex_set = self.z.remark1_vertices(reference, ZImage())
        assert vertex_set.size == 4
        assert not vertex_set.non_discrete_warning

    def test_open_strip_drops_ends(self, reference):
        opened = reference.model_copy(update={"end_reading": "open"})
        assert sorted(classical_vertices(opened)) == ["v", "w"]

    def test_enlarging_z_never_removes_vertices(self, disk_region, disk_graph):
        small = ZSpec(components=[ZPoint(x1=-1.0, x2=0.0)])
        large = ZSpec(components=small.components + [ZPoint(x1=0.3, x2=0.1), ZPoint(x1=-0.4, x2=-0.2)])
        before = self.z.remark1_vertices(disk_graph, self.z.project_z(disk_region, small, disk_graph))
        after = self.z.remark1_vertices(disk_graph, self.z.project_z(disk_region, large, disk_graph))
        assert set(before.critical_nodes) <= set(after.critical_nodes)
        assert {(p.node, p.edge, p.height) for p in before.z_points} <= {
            (p.node, p.edge, p.height) for p in after.z_points
        }
        assert after.size >= before.size

    def test_arcs_raise_warning(self, reference):
        image = ZImage(arcs=[ZImageArc(edge="b", heights=(-0.2, 0.2))])
        assert self.z.remark1_vertices(reference, image).non_discrete_warning


class TestIsomorphism:
    """同型判定のテスト"""

    def setup_method(self):
        self.z = zstruct_service

    def test_reflexive(self, reference):
        assert self.z.iso_check(reference, reference)
        assert self.z.iso_check(reference, reference, respect_heights=True)

    def test_renamed_ids(self, reference):
        rename = {"end-": "p", "v": "q", "w": "r", "end+": "s"}
        data = reference.to_json_dict()
        for n in data["nodes"]:
            n["id"] = rename[n["id"]]
        for e in data["edges"]:
            e["lo"], e["hi"] = rename[e["lo"]], rename[e["hi"]]
        assert self.z.iso_check(reference, ReebGraph.from_json_dict(data), respect_heights=True)

    @pytest.mark.parametrize("respect_heights", [False, True])
    def test_symmetric(self, reference, disk_graph, case3_graph, thm1_region, respect_heights):
        graphs = [reference, disk_graph, case3_graph, reeb_sweep_service.build_reeb(thm1_region)]
        for a in graphs:
            for b in graphs:
                assert self.z.iso_check(a, b, respect_heights) == self.z.iso_check(b, a, respect_heights)

    def test_size_mismatch(self, reference, disk_graph):
        assert not self.z.iso_check(disk_graph, reference)

    def test_negated_heights(self, reference):
        data = reference.to_json_dict()
        for n in data["nodes"]:
            n["height"] = -n["height"]
        for e in data["edges"]:
            e["heights"] = [-e["heights"][0], -e["heights"][1]]
        flipped = ReebGraph.from_json_dict(data)
        assert not self.z.iso_check(reference, flipped, respect_heights=True)
