import json
from pathlib import Path

import pytest

from dcp.cli import main

FIXTURE = str(Path(__file__).parent.parent / "fixtures" / "drive_through.json")


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestRun:
    def test_run_json_deterministic(self, capsys):
        code1, out1, _ = run_cli(capsys, "run", FIXTURE, "--seed", "7", "--format", "json")
        code2, out2, _ = run_cli(capsys, "run", FIXTURE, "--seed", "7", "--format", "json")
        assert code1 == code2 == 0
        assert out1 == out2
        report = json.loads(out1)
        assert report["decision"]["outcome"] == "unique_payer"
        assert report["oracle_agrees"] is True

    def test_seed_changes_output(self, capsys):
        _, out1, _ = run_cli(capsys, "run", FIXTURE, "--seed", "1", "--format", "json")
        _, out2, _ = run_cli(capsys, "run", FIXTURE, "--seed", "2", "--format", "json")
        assert out1 != out2

    def test_global_flag_position(self, capsys):
        _, out1, _ = run_cli(capsys, "--seed", "7", "--format", "json", "run", FIXTURE)
        _, out2, _ = run_cli(capsys, "run", FIXTURE, "--seed", "7", "--format", "json")
        assert out1 == out2

    def test_env_seed(self, capsys, monkeypatch):
        monkeypatch.setenv("DCP_SEED", "7")
        _, out1, _ = run_cli(capsys, "run", FIXTURE, "--format", "json")
        monkeypatch.delenv("DCP_SEED")
        _, out2, _ = run_cli(capsys, "run", FIXTURE, "--seed", "7", "--format", "json")
        assert out1 == out2

    def test_flag_beats_env(self, capsys, monkeypatch):
        monkeypatch.setenv("DCP_SEED", "1")
        _, out1, _ = run_cli(capsys, "run", FIXTURE, "--seed", "7", "--format", "json")
        monkeypatch.delenv("DCP_SEED")
        _, out2, _ = run_cli(capsys, "run", FIXTURE, "--seed", "7", "--format", "json")
        assert out1 == out2

    def test_missing_scenario_is_typed_error(self, capsys):
        code, _, err = run_cli(capsys, "run", "nope.json")
        assert code == 1
        assert "ScenarioError" in err

    def test_text_format(self, capsys):
        code, out, _ = run_cli(capsys, "run", FIXTURE, "--seed", "7")
        assert code == 0
        assert "unique_payer" in out


class TestParse:
    def test_toll_example_json(self, capsys):
        code, out, _ = run_cli(capsys, "parse", "Hey DashCam, pay for toll.", "--format", "json")
        assert code == 0
        assert json.loads(out) == {
            "use_case": "toll",
            "slot": None,
            "transcript": "Hey DashCam, pay for toll.",
        }

    def test_parse_error_exit_code(self, capsys):
        code, _, err = run_cli(capsys, "parse", "pay for unicorn rides")
        assert code == 1
        assert "UnknownUseCaseError" in err


class TestBatch:
    def test_batch_csv(self, capsys):
        code, out, _ = run_cli(capsys, "batch", FIXTURE, "--trials", "2", "--seed", "3")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0].startswith("sweep_key,")
        assert len(lines) == 2

    def test_batch_to_file(self, capsys, tmp_path):
        out_path = tmp_path / "metrics.csv"
        code, out, _ = run_cli(
            capsys, "batch", FIXTURE, "--trials", "2", "--out", str(out_path), "--seed", "3"
        )
        assert code == 0
        assert out_path.read_text().startswith("sweep_key,")

    def test_bad_sweep(self, capsys):
        code, _, err = run_cli(capsys, "batch", FIXTURE, "--trials", "1", "--sweep", "bogus")
        assert code == 1
        assert "error" in err


class TestGen:
    def test_gen_then_run(self, capsys, tmp_path):
        path = tmp_path / "s.json"
        code, _, _ = run_cli(capsys, "gen", "gas_station", "-o", str(path), "--seed", "4")
        assert code == 0
        code, out, _ = run_cli(capsys, "run", str(path), "--format", "json")
        assert code == 0
        assert json.loads(out)["decision"]["outcome"] == "unique_payer"

    def test_gen_stdout(self, capsys):
        code, out, _ = run_cli(capsys, "gen", "twins")
        assert code == 0
        assert json.loads(out)["shared_voice"] == [[0, 1]]


class TestBench:
    def test_bench_test_profile_json(self, capsys):
        code, out, _ = run_cli(
            capsys, "bench", "--profile", "test", "--dim", "16", "--format", "json"
        )
        assert code == 0
        result = json.loads(out)
        assert result["score_exact"] is True


class TestUsage:
    def test_unknown_flag_exits_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["run", FIXTURE, "--frobnicate"])
        assert exc.value.code == 2

    def test_no_subcommand_exits_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_unknown_template_choice_exits_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["gen", "warp_drive"])
        assert exc.value.code == 2


class TestAudit:
    def test_audit_jsonl_output(self, capsys, tmp_path):
        path = tmp_path / "audit.jsonl"
        code, _, _ = run_cli(
            capsys, "run", FIXTURE, "--seed", "5", "--audit", str(path), "--format", "json"
        )
        assert code == 0
        lines = path.read_text().strip().splitlines()
        assert len(lines) >= 5
        for line in lines:
            record = json.loads(line)
            assert set(record) == {"time", "actor", "event", "detail"}
