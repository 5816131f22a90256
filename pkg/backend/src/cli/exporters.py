"""
出力ファイルの書き出し

graph.json / graph.dot / report.json / evidence.json / samples.csv
"""

import json
from pathlib import Path
from typing import Any, Dict, List

import numpy as np

from shared.models.reeb import ReebGraph
from ..services.scenario_service import RunBundle
from ..core.logging import get_logger, LogCategory


logger = get_logger(__name__, LogCategory.CLI)


def _dump(path: Path, payload: Dict[str, Any]) -> Path:
    path.write_text(json.dumps(payload, ensure_ascii=False, indent=2, default=str), encoding="utf-8")
    return path


def graph_to_dot(graph: ReebGraph, name: str = "reeb") -> str:
    """DOT 形式（節点ラベルは kind@height、辺ラベルは非零シフト）"""
    lines = [f'digraph "{name}" {{', "  rankdir=BT;"]
    for node in sorted(graph.nodes, key=lambda n: (n.height, n.id)):
        lines.append(f'  "{node.id}" [label="{node.kind.value}@{node.height:.6g}"];')
    for edge in graph.edges:
        attrs = f' [label="{edge.shift:+d}"]' if edge.shift else ""
        lines.append(f'  "{edge.lo}" -> "{edge.hi}"{attrs};')
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_samples_csv(path: Path, samples: np.ndarray) -> Path:
    """零点集合の標本を 1 行 1 点で保存"""
    dim = samples.shape[1]
    header = ",".join(["x1", "x2"] + [f"y{k}" for k in range(1, dim - 1)])
    np.savetxt(path, samples, delimiter=",", header=header, comments="", fmt="%.17g")
    return path


def export_bundle(bundle: RunBundle, out_dir: Path) -> List[Path]:
    """run の出力一式を out_dir に書き出す"""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [_dump(out_dir / "report.json", bundle.report.model_dump(mode="json"))]
    if bundle.graph is not None:
        written.append(_dump(out_dir / "graph.json", bundle.graph.to_json_dict()))
        dot = out_dir / "graph.dot"
        dot.write_text(graph_to_dot(bundle.graph, bundle.report.scenario), encoding="utf-8")
        written.append(dot)
    if bundle.evidence is not None:
        written.append(_dump(out_dir / "evidence.json", bundle.evidence.to_json_dict()))
    if bundle.zverdict is not None:
        written.append(_dump(out_dir / "zgraph.json", bundle.zverdict.to_json_dict()))
    if bundle.rank is not None:
        written.append(_dump(out_dir / "rank.json", {
            "pass_count": bundle.rank.pass_count,
            "skipped_near_gap": bundle.rank.skipped_near_gap,
            "max_residual": bundle.rank.max_residual,
            "fail_list": bundle.rank.fail_list,
        }))
    if bundle.samples is not None:
        written.append(write_samples_csv(out_dir / "samples.csv", bundle.samples))
    logger.info("Outputs written", out_dir=str(out_dir), files=[p.name for p in written])
    return written


def dot_from_graph_json(path: Path) -> str:
    """graph.json を読み DOT を返す"""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return graph_to_dot(ReebGraph.from_json_dict(data), Path(path).stem)
