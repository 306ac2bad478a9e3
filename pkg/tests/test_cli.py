# tests/test_cli.py — beeplab
# ══════════════════════════════════════════════════════════════
# CLI tests: beeping/cli.py (subcommands, option merging, exit codes)
# ══════════════════════════════════════════════════════════════
import json

import pytest

from beeping.cli import EXIT_ARGS, EXIT_IO, EXIT_OK, EXIT_OVERFLOW, main
from beeping.machine import machine_to_json


# ══════════════════════════════════════════════════════════════
# elect / lonely
# ══════════════════════════════════════════════════════════════
@pytest.mark.integration
class TestElectCommand:

    def test_csv_output(self, tmp_path, capsys):
        out = tmp_path / "elect.csv"
        code = main(["elect", "--n", "1,2", "--trials", "5", "--seed", "3", "--out", str(out)])
        assert code == EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0].startswith("protocol,n,epsilon,q,n_lower_bound,trials")
        assert len(lines) == 3
        assert lines[1].startswith("fixed-error,1,1/10,2,1,5,0,0,")
        assert "fixed-error" in capsys.readouterr().out

    def test_bad_epsilon(self, capsys):
        assert main(["elect", "--epsilon", "2"]) == EXIT_ARGS
        assert capsys.readouterr().err.startswith("error:")

    def test_unknown_preset(self):
        assert main(["elect", "--preset", "nope"]) == EXIT_ARGS

    def test_missing_directory(self, tmp_path):
        out = tmp_path / "missing" / "elect.csv"
        assert main(["elect", "--trials", "2", "--out", str(out)]) == EXIT_IO

    def test_config_file_merged_under_flags(self, tmp_path):
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"epsilon": "1/4", "n": [1, 2], "trials": 9}))
        out = tmp_path / "elect.csv"
        assert main(["elect", "--config", str(config), "--trials", "3", "--out", str(out)]) == EXIT_OK
        rows = out.read_text().splitlines()[1:]
        assert [r.split(",")[:6] for r in rows] == [
            ["fixed-error", "1", "1/4", "2", "1", "3"],
            ["fixed-error", "2", "1/4", "2", "1", "3"],
        ]

    def test_config_must_be_object(self, tmp_path):
        config = tmp_path / "run.json"
        config.write_text("[1, 2]")
        assert main(["elect", "--config", str(config)]) == EXIT_ARGS

    def test_lonely(self, tmp_path):
        out = tmp_path / "lonely.csv"
        code = main(["lonely", "--base-algo", "double-safe", "--epsilon", "1/20", "--n", "1",
                     "--trials", "3", "--out", str(out)])
        assert code == EXIT_OK
        assert out.read_text().splitlines()[1].startswith("double-safe,1,1/20,")


# ══════════════════════════════════════════════════════════════
# analyze / audit / validate
# ══════════════════════════════════════════════════════════════
@pytest.mark.integration
class TestAnalysisCommands:

    def test_analyze_single_node(self, capsys):
        assert main(["analyze", "--algo", "fixed-error", "--n", "1"]) == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["protocol"] == "universal+fixed-error"
        assert doc["violation"]["exact"] == "0/1"
        assert doc["truncated"] is False

    def test_analyze_to_file(self, tmp_path, capsys):
        out = tmp_path / "exact.json"
        assert main(["analyze", "--n", "2", "--epsilon", "1/4", "--out", str(out)]) == EXIT_OK
        doc = json.loads(out.read_text())
        assert doc["n"] == 2
        assert "violation" in capsys.readouterr().out

    def test_analyze_needs_single_n(self):
        assert main(["analyze", "--n", "1,2"]) == EXIT_ARGS

    def test_analyze_overflow(self, monkeypatch, capsys):
        monkeypatch.setenv("BEEPLAB_CONFIG_CAP", "1")
        assert main(["analyze", "--n", "2"]) == EXIT_OVERFLOW
        assert "error:" in capsys.readouterr().err

    def test_audit(self, capsys):
        assert main(["audit", "--epsilon", "1/8"]) == EXIT_OK
        out = capsys.readouterr().out
        assert out.startswith("universal+fixed-error: s = ")
        assert "lower bound" in out

    def test_audit_overflow(self, monkeypatch):
        monkeypatch.setenv("BEEPLAB_STATE_CAP", "3")
        assert main(["audit"]) == EXIT_OVERFLOW

    def test_audit_then_validate(self, tmp_path, capsys):
        machine = tmp_path / "machine.json"
        assert main(["audit", "--out", str(machine)]) == EXIT_OK
        first = capsys.readouterr().out
        assert main(["validate", "--machine", str(machine), "--q", "2"]) == EXIT_OK
        out = capsys.readouterr().out
        assert out.strip().endswith("0 precision violation(s)")
        size = int(first.split("s = ")[1].split()[0])
        assert out.startswith(f"{size} states")

    def test_validate_bad_json(self, tmp_path):
        bad = tmp_path / "machine.json"
        bad.write_text("{not json")
        assert main(["validate", "--machine", str(bad), "--q", "2"]) == EXIT_ARGS

    def test_validate_missing_file(self, tmp_path):
        assert main(["validate", "--machine", str(tmp_path / "none.json"), "--q", "2"]) == EXIT_IO

    def test_validate_reports_out_of_range(self, tmp_path, capsys, coin_machine):
        doc = machine_to_json(coin_machine)
        doc["delta_silent"]["0"] = [[1, "1/3"], [2, "2/3"]]
        path = tmp_path / "thirds.json"
        path.write_text(json.dumps(doc))
        assert main(["validate", "--machine", str(path), "--q", "2"]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "state 0 (silent) -> 1: probability 1/3 is outside [1/2, 1-1/2]"
        assert lines[-1] == "5 states, 2 precision violation(s)"
        assert not any("multiple" in line for line in lines)


# ══════════════════════════════════════════════════════════════
# trace / counter / presets
# ══════════════════════════════════════════════════════════════
@pytest.mark.integration
class TestOtherCommands:

    def test_trace_jsonl_and_csv(self, tmp_path):
        out, csv = tmp_path / "trace.jsonl", tmp_path / "rounds.csv"
        assert main(["trace", "--n", "1", "--seed", "0", "--out", str(out), "--csv", str(csv)]) == EXIT_OK
        records = [json.loads(line) for line in out.read_text().splitlines()]
        assert records[0] == {"type": "header", "seed": 0, "n": 1}
        assert records[-1]["final_labels"] == ["leader"]
        assert len(csv.read_text().splitlines()) == 8

    def test_trace_to_stdout(self, capsys):
        assert main(["trace", "--n", "2", "--seed", "1"]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert json.loads(lines[-1])["type"] == "summary"

    def test_counter_parity(self, tmp_path):
        out = tmp_path / "parity.csv"
        code = main(["counter", "--program", "parity", "--n", "4", "--init", "c1=all",
                     "--trials", "3", "--out", str(out)])
        assert code == EXIT_OK
        lines = out.read_text().splitlines()
        assert len(lines) == 2
        assert lines[1].startswith("parity,4,c1=all,1/20,")

    def test_counter_config_file_keeps_counter_epsilon(self, tmp_path):
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"program": "threshold", "init": ["c1=3"], "n": [3]}))
        out = tmp_path / "threshold.csv"
        code = main(["counter", "--config", str(config), "--trials", "1", "--out", str(out)])
        assert code == EXIT_OK
        assert out.read_text().splitlines()[1].startswith("threshold,3,c1=3,1/20,")

    def test_counter_needs_program(self):
        assert main(["counter", "--n", "3"]) == EXIT_ARGS

    def test_counter_parse_error(self, tmp_path):
        source = tmp_path / "broken.cm"
        source.write_text("INC 9\n")
        assert main(["counter", "--program", str(source), "--n", "2"]) == EXIT_ARGS

    def test_presets(self, capsys):
        assert main(["presets"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "fe_safety" in out and "parity_sweep" in out
