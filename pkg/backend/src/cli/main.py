"""
reebscape コマンドライン

    reebscape run <scenario...> [flags]
    reebscape export-dot <graph.json>
    reebscape validate <config.toml>
"""

import argparse
import json
import sys
import tomllib
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from shared.models.scenario import CheckName, ScenarioName
from ..config.settings import get_settings
from ..core.config import get_scenario_defaults
from ..core.errors import ReebscapeError, ReebscapeErrors
from ..core.logging import get_logger, setup_logging, LogCategory
from ..services.scenario_service import scenario_service
from .exporters import dot_from_graph_json, export_bundle


logger = get_logger(__name__, LogCategory.CLI)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_ERROR = 2

# フラグ名 → パラメータ名
PARAMETER_FLAGS = ("m1", "m2", "R0", "R", "theta", "t1", "t2", "seed", "samples", "period")


def parse_window(text: str) -> Tuple[float, float]:
    """'a..b' 形式の x2 窓"""
    try:
        lo, hi = (float(v) for v in text.split("..", 1))
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must look like a..b, got {text!r}")
    if not lo < hi:
        raise argparse.ArgumentTypeError("window must be increasing")
    return lo, hi


# 負の値で始まる窓 (-6..6) は argparse がオプションと見なすので連結する
VALUE_FLAGS_WITH_NEGATIVE_TEXT = ("--window",)


def join_negative_values(argv: Sequence[str]) -> List[str]:
    """'--window -6..6' を '--window=-6..6' に書き換える"""
    out: List[str] = []
    items = list(argv)
    i = 0
    while i < len(items):
        item = items[i]
        if item in VALUE_FLAGS_WITH_NEGATIVE_TEXT and i + 1 < len(items) and items[i + 1][:1] == "-" and items[i + 1][:2] != "--":
            out.append(f"{item}={items[i + 1]}")
            i += 2
            continue
        out.append(item)
        i += 1
    return out


def parse_theta(text: str):
    if text == "auto":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"theta must be a number or 'auto', got {text!r}")


def parse_checks(text: str) -> List[str]:
    names = [c.strip() for c in text.split(",") if c.strip()]
    valid = {c.value for c in CheckName}
    unknown = [c for c in names if c not in valid]
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown checks: {', '.join(unknown)}")
    return names


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=get_scenario_defaults().app_name, description="平面領域の高さ関数の Reeb グラフ検証")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="シナリオを実行")
    run.add_argument("scenarios", nargs="*", metavar="scenario",
                     help="シナリオ名 (" + ", ".join(s.value for s in ScenarioName) + ")、--config 使用時は省略可")
    run.add_argument("--window", type=parse_window, default=None, help="x2 窓 a..b")
    run.add_argument("--m1", type=int, default=None, help="y1 ブロックの次元")
    run.add_argument("--m2", type=int, default=None, help="y2 ブロックの次元")
    run.add_argument("--R0", type=float, default=None, help="円のレベル")
    run.add_argument("--R", type=float, default=None, help="S-D-CRAn スケール")
    run.add_argument("--theta", type=parse_theta, default=None, help="回転角または auto")
    run.add_argument("--t1", type=float, default=None, help="ケース2の平行移動量")
    run.add_argument("--t2", type=float, default=None, help="ケース2の x2 圧縮率")
    run.add_argument("--period", type=float, default=None, help="x2 方向の周期")
    run.add_argument("--seed", type=int, default=None, help="標本化の乱数シード")
    run.add_argument("--samples", type=int, default=None, help="零点集合の標本数")
    run.add_argument("--checks", type=parse_checks, default=None, help="カンマ区切りの検査名")
    run.add_argument("--out", type=Path, default=None, help="出力ディレクトリ")
    run.add_argument("--config", type=Path, default=None, help="シナリオ TOML")
    run.add_argument("--jobs", type=int, default=None, help="並列実行数")

    dot = sub.add_parser("export-dot", help="graph.json を DOT に変換")
    dot.add_argument("graph", type=Path, help="graph.json")
    dot.add_argument("--out", type=Path, default=None, help="出力先（省略時は標準出力）")

    validate = sub.add_parser("validate", help="シナリオ TOML を検証")
    validate.add_argument("config", type=Path, help="シナリオ TOML")
    return parser


def load_config(path: Path) -> List[Dict[str, Any]]:
    """TOML を読みシナリオ辞書の列を返す（[[scenario]] 配列にも対応）"""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ReebscapeErrors.scenario_invalid([f"{path}: {exc}"]) from exc
    if "scenario" in data and isinstance(data["scenario"], list):
        return [dict(item) for item in data["scenario"]]
    return [data]


def scenario_payloads(args: argparse.Namespace) -> List[Dict[str, Any]]:
    """引数と設定ファイルからシナリオ辞書を組み立てる"""
    bases = load_config(args.config) if args.config else []
    if args.scenarios:
        by_name = {b.get("name"): b for b in bases}
        bases = [dict(by_name.get(name, {}), name=name) for name in args.scenarios]
    if not bases:
        raise ReebscapeErrors.scenario_invalid(["no scenario given (name or --config)"])

    overrides = {k: getattr(args, k) for k in PARAMETER_FLAGS if getattr(args, k) is not None}
    if args.window is not None:
        overrides["window"] = list(args.window)

    payloads = []
    for base in bases:
        payload = dict(base)
        payload["parameters"] = {**base.get("parameters", {}), **overrides}
        if args.checks is not None:
            payload["checks"] = args.checks
        payloads.append(payload)
    return payloads


def run_payload(payload: Dict[str, Any], out_dir: Optional[str]) -> Tuple[int, Dict[str, Any]]:
    """1 シナリオを実行（プロセスプールから呼ばれる）"""
    try:
        scenario = scenario_service.parse(payload)
        bundle = scenario_service.run(scenario)
    except ReebscapeError as exc:
        logger.error("Scenario aborted", exception=exc, scenario=payload.get("name"))
        return EXIT_ERROR, exc.to_dict()
    if out_dir is not None:
        export_bundle(bundle, Path(out_dir))
    return bundle.report.exit_code, bundle.report.model_dump(mode="json")


def _summary(report: Dict[str, Any]) -> str:
    rows = [f"[{report['scenario']}]"]
    for check in report.get("checks", []):
        mark = "PASS" if check["passed"] else "FAIL"
        rows.append(f"  {check['check']:<15} {mark}  observed={check.get('observed')} expected={check.get('expected')}")
    return "\n".join(rows)


def command_run(args: argparse.Namespace) -> int:
    payloads = scenario_payloads(args)
    settings = get_settings()
    root = args.out or Path(settings.output.output_dir)
    jobs = args.jobs or settings.output.jobs
    logger.info("Run started", scenarios=[p.get("name") for p in payloads], jobs=jobs, settings=settings.to_dict())
    # 複数シナリオはシナリオ名のサブディレクトリへ
    dirs = [str(root / str(p.get("name", i))) if len(payloads) > 1 else str(root) for i, p in enumerate(payloads)]

    if jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_payload, payloads, dirs))
    else:
        results = [run_payload(p, d) for p, d in zip(payloads, dirs)]

    code = EXIT_OK
    for status, body in results:
        if status == EXIT_ERROR:
            print(json.dumps(body, ensure_ascii=False), file=sys.stderr)
        else:
            print(_summary(body))
        code = max(code, status)
    return code


def command_export_dot(args: argparse.Namespace) -> int:
    try:
        dot = dot_from_graph_json(args.graph)
    except (OSError, ValueError, KeyError) as exc:
        payload = {"error": {"code": "GRAPH_JSON_INVALID", "message": str(exc)}}
        print(json.dumps(payload, ensure_ascii=False), file=sys.stderr)
        return EXIT_ERROR
    if args.out:
        args.out.write_text(dot, encoding="utf-8")
    else:
        sys.stdout.write(dot)
    return EXIT_OK


def command_validate(args: argparse.Namespace) -> int:
    for payload in load_config(args.config):
        scenario = scenario_service.parse(payload)
        print(f"{args.config}: {scenario.name.value} ok ({', '.join(c.value for c in scenario.ordered_checks)})")
    return EXIT_OK


COMMANDS = {
    "run": command_run,
    "export-dot": command_export_dot,
    "validate": command_validate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    args = build_parser().parse_args(join_negative_values(argv))
    setup_logging()
    try:
        return COMMANDS[args.command](args)
    except ReebscapeError as exc:
        print(json.dumps(exc.to_dict(), ensure_ascii=False), file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
