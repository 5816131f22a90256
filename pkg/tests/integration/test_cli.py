"""
コマンドラインのテスト
"""

import argparse
import json
from pathlib import Path

import pytest

from shared.models.scenario import CheckName, ScenarioName
from backend.src.cli.main import (
    main, build_parser, parse_window, join_negative_values, EXIT_OK, EXIT_CHECK_FAILED, EXIT_ERROR,
)
from backend.src.core.config import get_scenario_defaults
from backend.src.services.scenario_service import EXPECTED_VERDICTS


FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


class TestRun:
    """run サブコマンド"""

    def test_disk_writes_outputs(self, tmp_path, capsys):
        code = main(["run", "disk", "--checks", "reeb,properness", "--out", str(tmp_path)])
        assert code == EXIT_OK
        assert {"report.json", "graph.json", "graph.dot"} <= {p.name for p in tmp_path.iterdir()}
        report = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
        assert report["scenario"] == "disk"
        assert [c["check"] for c in report["checks"]] == ["reeb", "properness"]
        assert "[disk]" in capsys.readouterr().out

    def test_failed_check_exit_code(self, tmp_path, monkeypatch):
        monkeypatch.setitem(EXPECTED_VERDICTS[ScenarioName.DISK], CheckName.REEB, "periodic-graph")
        assert main(["run", "disk", "--out", str(tmp_path)]) == EXIT_CHECK_FAILED

    def test_evidence_file_for_case1(self, tmp_path):
        code = main(["run", "thm3-case1", "--checks", "reeb,accumulation", "--out", str(tmp_path)])
        assert code == EXIT_OK
        evidence = json.loads((tmp_path / "evidence.json").read_text(encoding="utf-8"))
        assert evidence["verdict"] == "not-a-graph"
        assert not (tmp_path / "graph.json").exists()

    def test_samples_csv(self, tmp_path):
        code = main(["run", "disk", "--checks", "manifold", "--samples", "30", "--seed", "1", "--out", str(tmp_path)])
        assert code == EXIT_OK
        lines = (tmp_path / "samples.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "x1,x2,y1,y2"
        assert len(lines) == 31

    def test_config_batch(self, tmp_path):
        code = main(["run", "--config", str(FIXTURES / "batch.toml"), "--out", str(tmp_path)])
        assert code == EXIT_OK
        assert (tmp_path / "disk" / "report.json").exists()
        assert (tmp_path / "thm1" / "graph.json").exists()

    def test_flags_override_config(self, tmp_path):
        code = main(["run", "disk", "--config", str(FIXTURES / "disk.toml"), "--checks", "reeb",
                     "--R0", "4", "--out", str(tmp_path)])
        assert code == EXIT_OK
        report = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
        assert report["parameters"]["R0"] == 4.0
        assert report["parameters"]["samples"] == 80

    def test_invalid_parameter(self, tmp_path, capsys):
        code = main(["run", "thm3-case2", "--t2", "1.5", "--out", str(tmp_path)])
        assert code == EXIT_ERROR
        payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert payload["error"]["code"] == "SCENARIO_CONFIG_INVALID"

    def test_missing_scenario(self, capsys):
        assert main(["run"]) == EXIT_ERROR

    def test_unknown_check_is_a_usage_error(self):
        with pytest.raises(SystemExit):
            main(["run", "disk", "--checks", "reeb,levels"])

    def test_window_flag(self):
        assert parse_window("-3..3") == (-3.0, 3.0)
        with pytest.raises(argparse.ArgumentTypeError):
            parse_window("3..-3")

    def test_program_name_from_defaults(self):
        assert build_parser().prog == get_scenario_defaults().app_name == "reebscape"

    def test_negative_window_as_separate_argument(self):
        argv = ["run", "thm1", "--window", "-6..6", "--checks", "reeb"]
        assert join_negative_values(argv)[2] == "--window=-6..6"
        # 値を取らないまま次のフラグが来る場合は書き換えない
        assert join_negative_values(["run", "--window", "--checks", "reeb"])[1] == "--window"

    def test_thm1_with_negative_window(self, tmp_path):
        code = main(["run", "thm1", "--window", "-6..6", "--m1", "1", "--m2", "1",
                     "--checks", "reeb,properness,manifold", "--out", str(tmp_path)])
        assert code == EXIT_OK
        report = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
        assert report["parameters"]["window"] == [-6.0, 6.0]
        graph = json.loads((tmp_path / "graph.json").read_text(encoding="utf-8"))
        assert graph["flavor"] == {"periodic": 4.0}

    @pytest.mark.slow
    def test_thm1_full_invocation(self, tmp_path):
        code = main(["run", "thm1", "--window", "-6..6", "--m1", "1", "--m2", "1",
                     "--checks", "reeb,properness,manifold,oracle-compare", "--out", str(tmp_path)])
        assert code == EXIT_OK


class TestExportDot:
    """export-dot サブコマンド"""

    def test_round_trip_from_run(self, tmp_path, capsys):
        assert main(["run", "thm1", "--out", str(tmp_path)]) == EXIT_OK
        capsys.readouterr()
        assert main(["export-dot", str(tmp_path / "graph.json")]) == EXIT_OK
        out = capsys.readouterr().out
        assert 'digraph "graph"' in out
        assert "split@-0.5" in out
        assert "merge@0.5" in out

    def test_writes_file(self, tmp_path):
        main(["run", "disk", "--out", str(tmp_path)])
        target = tmp_path / "copy.dot"
        assert main(["export-dot", str(tmp_path / "graph.json"), "--out", str(target)]) == EXIT_OK
        assert target.read_text(encoding="utf-8") == (tmp_path / "graph.dot").read_text(encoding="utf-8").replace(
            'digraph "disk"', 'digraph "graph"')

    def test_bad_json(self, tmp_path, capsys):
        bad = tmp_path / "graph.json"
        bad.write_text("{not json", encoding="utf-8")
        assert main(["export-dot", str(bad)]) == EXIT_ERROR
        assert "GRAPH_JSON_INVALID" in capsys.readouterr().err


class TestValidate:
    """validate サブコマンド"""

    @pytest.mark.parametrize("name", ["disk.toml", "batch.toml", "custom_annulus.toml"])
    def test_valid_files(self, name, capsys):
        assert main(["validate", str(FIXTURES / name)]) == EXIT_OK
        assert "ok" in capsys.readouterr().out

    def test_all_errors_reported(self, capsys):
        assert main(["validate", str(FIXTURES / "invalid.toml")]) == EXIT_ERROR
        payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        errors = payload["error"]["details"]["errors"]
        assert len(errors) == 2

    @pytest.mark.parametrize("name", ["broken.toml", "missing.toml"])
    def test_unreadable_files(self, name):
        assert main(["validate", str(FIXTURES / name)]) == EXIT_ERROR
