"""Command-line interface: subcommands, exit codes, file outputs."""

import json
import subprocess

import pytest

from sgcp import read_field_csv, read_pattern_csv
from sgcp.cli import main


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    code = main(["simulate", "--out", str(out), "--n", "20",
                 "--seed", "11", "--resolution", "16"])
    assert code == 0
    return out


class TestSimulate:
    def test_outputs(self, sim_dir):
        meta = json.loads((sim_dir / "simulate.json").read_text())
        assert meta["n"] == 20
        assert meta["seed"] == 11
        assert len(meta["counts"]) == 20
        assert meta["total_points"] == sum(meta["counts"])
        patterns = sorted(sim_dir.glob("pattern_*.csv"))
        assert len(patterns) == 20
        pat = read_pattern_csv(patterns[0])
        assert pat.n == meta["counts"][0]
        truth = read_field_csv(sim_dir / "truth.csv")
        assert truth.grid.resolution == 16

    def test_bitwise_repeatable(self, sim_dir, tmp_path):
        out2 = tmp_path / "again"
        assert main(["simulate", "--out", str(out2), "--n", "20",
                     "--seed", "11", "--resolution", "16"]) == 0
        for name in ["simulate.json", "truth.csv", "pattern_0003.csv"]:
            assert (out2 / name).read_bytes() == (sim_dir / name).read_bytes()

    def test_zero_patterns_writes_manifest_only(self, tmp_path):
        out = tmp_path / "empty"
        assert main(["simulate", "--out", str(out), "--n", "0"]) == 0
        assert list(out.glob("pattern_*.csv")) == []
        meta = json.loads((out / "simulate.json").read_text())
        assert meta["total_points"] == 0
        assert meta["integral"] == pytest.approx(2.0)  # sin1d mass is exact

    def test_constant_truth_poisson_aggregate(self, tmp_path):
        # 100 patterns from a constant-4 truth: total ~ Poisson(400)
        out = tmp_path / "agg"
        assert main(["simulate", "--out", str(out), "--n", "100",
                     "--truth", "const4", "--seed", "3"]) == 0
        meta = json.loads((out / "simulate.json").read_text())
        assert abs(meta["total_points"] - 400) <= 3 * 20.0

    def test_unknown_truth_is_config_error(self, tmp_path):
        code = main(["simulate", "--out", str(tmp_path / "x"),
                     "--n", "2", "--truth", "nope"])
        assert code == 2


class TestFit:
    def test_fit_and_repeat(self, sim_dir, tmp_path):
        args = ["fit", "--data", str(sim_dir), "--seed", "11",
                "--n-iter", "1500", "--n-burn", "500", "--resolution", "16"]
        out1, out2 = tmp_path / "f1", tmp_path / "f2"
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        summary = json.loads((out1 / "fit.json").read_text())
        assert summary["n_patterns"] == 20
        assert summary["lambda_star_mean"] > 0.0
        assert "distance_mean_to_truth" in summary  # truth.csv was present
        for name in ["fit.json", "posterior_mean.csv", "chain.jsonl",
                     "intensity_draws.csv"]:
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
        field = read_field_csv(out1 / "posterior_mean.csv")
        assert field.grid.resolution == 16

    def test_chain_files_content(self, sim_dir, tmp_path):
        out = tmp_path / "f"
        assert main(["fit", "--data", str(sim_dir), "--out", str(out),
                     "--seed", "11", "--n-iter", "1500", "--n-burn", "500",
                     "--resolution", "16"]) == 0
        lines = (out / "chain.jsonl").read_text().splitlines()
        meta = json.loads(lines[0])
        assert meta["kind"] == "sgcp-chain"
        assert meta["seed"] == 11
        assert meta["n_kept"] == len(lines) - 1 == 200  # (1500-500)/5
        draw = json.loads(lines[1])
        assert set(draw) == {"ell", "iteration", "lambda_star", "log_post"}
        assert draw["iteration"] == 500
        # draws matrix: comment meta, a dim,resolution header, one row per draw
        rows = [ln for ln in (out / "intensity_draws.csv").read_text().splitlines()
                if not ln.startswith("#")]
        assert rows[0] == "1,16"
        assert len(rows) - 1 == meta["n_kept"]
        assert all(len(r.split(",")) == 16 for r in rows[1:])

    def test_missing_patterns_is_data_error(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        code = main(["fit", "--data", str(empty), "--out", str(tmp_path / "o")])
        assert code == 3

    def test_malformed_pattern_is_data_error(self, tmp_path):
        bad = tmp_path / "bad"
        bad.mkdir()
        (bad / "pattern_0000.csv").write_text("1,resolution-free\nbogus\n")
        code = main(["fit", "--data", str(bad), "--out", str(tmp_path / "o2"),
                     "--n-iter", "100", "--n-burn", "10"])
        assert code == 3


class TestConfigHandling:
    def test_config_file_applies(self, tmp_path):
        cfg = tmp_path / "h.ini"
        cfg.write_text("[experiment]\nseed = 123\nresolution = 8\n")
        out = tmp_path / "sim"
        assert main(["simulate", "--config", str(cfg), "--out", str(out), "--n", "3"]) == 0
        meta = json.loads((out / "simulate.json").read_text())
        assert meta["seed"] == 123
        assert meta["resolution"] == 8

    def test_flag_overrides_file(self, tmp_path):
        cfg = tmp_path / "h.ini"
        cfg.write_text("[experiment]\nseed = 123\n")
        out = tmp_path / "sim"
        assert main(["simulate", "--config", str(cfg), "--out", str(out),
                     "--n", "2", "--seed", "9"]) == 0
        assert json.loads((out / "simulate.json").read_text())["seed"] == 9

    def test_unknown_key_rejected(self, tmp_path):
        cfg = tmp_path / "h.ini"
        cfg.write_text("[experiment]\nspeed = 5\n")
        assert main(["simulate", "--config", str(cfg),
                     "--out", str(tmp_path / "x"), "--n", "2"]) == 2

    def test_bad_value_rejected(self, tmp_path):
        cfg = tmp_path / "h.ini"
        cfg.write_text("[chain]\nn_iter = soon\n")
        assert main(["simulate", "--config", str(cfg),
                     "--out", str(tmp_path / "x"), "--n", "2"]) == 2

    def test_missing_config_file_rejected(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "absent.ini"),
                     "--out", str(tmp_path / "x"), "--n", "2"]) == 2


class TestBench:
    def test_synthetic_run_and_baseline_pass(self, tmp_path):
        out = tmp_path / "b1"
        assert main(["bench", "--out", str(out), "--synthetic",
                     "--ns", "25,50,100", "--replicates", "2"]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["slope"] == pytest.approx(-0.5, abs=1e-12)
        assert (out / "cells.csv").exists() and (out / "medians.csv").exists()
        # self-comparison must pass the band check
        code = main(["bench", "--out", str(tmp_path / "b2"), "--synthetic",
                     "--ns", "25,50,100", "--replicates", "2",
                     "--baseline", str(out / "report.json")])
        assert code == 0

    def test_baseline_mismatch_fails(self, tmp_path):
        base = tmp_path / "base.json"
        base.write_text(json.dumps({"slope": -0.9}))
        code = main(["bench", "--out", str(tmp_path / "b"), "--synthetic",
                     "--ns", "25,50,100", "--replicates", "2",
                     "--baseline", str(base)])
        assert code == 5

    def test_shallow_baseline_fails(self, tmp_path):
        base = tmp_path / "base.json"
        base.write_text(json.dumps({"slope": -0.2}))
        code = main(["bench", "--out", str(tmp_path / "b"), "--synthetic",
                     "--ns", "25,50,100", "--replicates", "2",
                     "--baseline", str(base)])
        assert code == 5

    def test_synthetic_bitwise_repeatable(self, tmp_path):
        a, b = tmp_path / "ra", tmp_path / "rb"
        args = ["bench", "--synthetic", "--ns", "25,50", "--replicates", "2"]
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()


class TestCalibrate:
    def test_clean_passes(self, tmp_path, capsys):
        out = tmp_path / "cal"
        code = main(["calibrate", "--rounds", "3000", "--resolution", "8",
                     "--sweeps", "4", "--seed", "55", "--out", str(out)])
        assert code == 0
        blob = json.loads((out / "calibrate.json").read_text())
        assert blob["diverged"] is False
        assert len(blob["z_scores"]) == 6
        assert "CALIBRATION PASS" in capsys.readouterr().out

    def test_mutated_fails(self, capsys):
        code = main(["calibrate", "--rounds", "3000", "--resolution", "8",
                     "--sweeps", "4", "--seed", "55", "--mutate"])
        assert code == 5
        assert "CALIBRATION FAIL" in capsys.readouterr().out


class TestVerifyPriors:
    def test_passes_with_defaults(self, tmp_path, capsys):
        out = tmp_path / "v"
        code = main(["verify-priors", "--out", str(out)])
        assert code == 0
        text = capsys.readouterr().out
        assert text.count("PASS") == 5
        blob = json.loads((out / "verify.json").read_text())
        assert all(c["passed"] for c in blob["checks"])


def test_console_script_help():
    r = subprocess.run(["sgcp", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    assert "simulate" in r.stdout and "bench" in r.stdout
