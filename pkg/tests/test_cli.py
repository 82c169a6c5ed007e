from __future__ import annotations

import json
import subprocess
import sys

import pytest

from rssikit.cli import main


def run_cli(*argv) -> int:
    return main(list(argv))


@pytest.fixture
def trace_csv(tmp_path):
    path = tmp_path / "trace.csv"
    rc = run_cli("simulate", "--channel", "swell", "--radio", "cc2538",
                 "--packets", "1500", "--seed", "5", "--out", str(path))
    assert rc == 0
    return path


class TestSimulate:
    def test_writes_parseable_trace(self, trace_csv):
        text = trace_csv.read_text()
        assert text.startswith("seq,t_s,rssi_dbm,tx_power_dbm\n")
        assert len(text.strip().split("\n")) == 1501

    def test_loss_flag_creates_gaps(self, tmp_path):
        path = tmp_path / "lossy.csv"
        rc = run_cli("simulate", "--channel", "swell", "--radio", "cc2538",
                     "--packets", "1000", "--seed", "5",
                     "--loss", "bernoulli:0.3", "--out", str(path))
        assert rc == 0
        n_rows = len(path.read_text().strip().split("\n")) - 1
        assert 550 < n_rows < 850

    def test_gilbert_loss_flag(self, tmp_path):
        path = tmp_path / "ge.csv"
        rc = run_cli("simulate", "--channel", "ripple", "--radio", "cc1200",
                     "--packets", "500", "--seed", "1",
                     "--loss", "gilbert:0.05,0.3,0.0,1.0", "--out", str(path))
        assert rc == 0

    def test_byte_identical_across_runs(self, tmp_path):
        args = ("simulate", "--channel", "ar2", "--radio", "cc2538",
                "--packets", "800", "--seed", "42")
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run_cli(*args, "--out", str(p1)) == 0
        assert run_cli(*args, "--out", str(p2)) == 0
        assert p1.read_bytes() == p2.read_bytes()


class TestAcf:
    def test_schema_and_determinism(self, trace_csv, tmp_path):
        out1, out2 = tmp_path / "acf1.csv", tmp_path / "acf2.csv"
        for out in (out1, out2):
            rc = run_cli("acf", "--in", str(trace_csv), "--max-lag", "10",
                         "--out", str(out))
            assert rc == 0
        assert out1.read_text().startswith("lag_s,acov,acf_norm,n_pairs,d1\n")
        assert len(out1.read_text().strip().split("\n")) == 12
        assert out1.read_bytes() == out2.read_bytes()


class TestFitPredict:
    def test_fit_dumps_model_json(self, trace_csv, tmp_path):
        model_path = tmp_path / "model.json"
        rc = run_cli("fit", "--in", str(trace_csv), "--method", "orthonormal",
                     "--lag", "1", "--out", str(model_path))
        assert rc == 0
        payload = json.loads(model_path.read_text())
        assert payload["method"] == "orthonormal"
        assert "w_level" in payload and "w_slope" in payload
        assert "basis" in payload and "analytic_mse_db2" in payload

    def test_predict_from_simplified_model(self, trace_csv, tmp_path, capsys):
        model_path = tmp_path / "model.json"
        # CC2538 cadence: lag 3 is 300 ms.
        rc = run_cli("fit", "--in", str(trace_csv), "--method", "simplified",
                     "--lag", "3", "--out", str(model_path))
        assert rc == 0
        rc = run_cli("predict", "--model", str(model_path),
                     "--anchor-rssi", "-70", "--anchor-slope", "2", "--steps", "1")
        assert rc == 0
        out = json.loads(capsys.readouterr().out)
        assert out["value_dbm"] == pytest.approx(-69.4)

    def test_fit_determinism(self, trace_csv, tmp_path):
        p1, p2 = tmp_path / "m1.json", tmp_path / "m2.json"
        for p in (p1, p2):
            assert run_cli("fit", "--in", str(trace_csv), "--method", "normal_eq",
                           "--lag", "2", "--out", str(p)) == 0
        assert p1.read_bytes() == p2.read_bytes()


class TestEvaluate:
    def test_writes_csv_and_json(self, trace_csv, tmp_path):
        base = tmp_path / "report"
        rc = run_cli("evaluate", "--in", str(trace_csv), "--method", "orthonormal",
                     "--lags", "1,2,3", "--out", str(base))
        assert rc == 0
        assert (tmp_path / "report.csv").exists()
        assert (tmp_path / "report.json").exists()
        payload = json.loads((tmp_path / "report.json").read_text())
        assert [r["lag_steps"] for r in payload["rows"]] == [1, 2, 3]

    def test_byte_identical_across_runs(self, trace_csv, tmp_path):
        outs = []
        for name in ("r1", "r2"):
            base = tmp_path / name
            assert run_cli("evaluate", "--in", str(trace_csv), "--method",
                           "simplified", "--lags", "1,2", "--out", str(base)) == 0
            outs.append(base.with_suffix(".csv").read_bytes()
                        + base.with_suffix(".json").read_bytes())
        assert outs[0] == outs[1]


class TestAtpcCommand:
    def test_loop_csv_schema(self, tmp_path):
        out = tmp_path / "loop.csv"
        rc = run_cli("atpc", "--channel", "swell", "--radio", "cc2538",
                     "--threshold", "-90", "--seed", "3", "--packets", "600",
                     "--path-loss", "80", "--loss", "bernoulli:0.3",
                     "--out", str(out))
        assert rc == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "seq,tx_dbm,rssi_dbm,delivered,predicted,mode"
        assert len(lines) == 601

    def test_byte_identical_across_runs(self, tmp_path):
        args = ("atpc", "--channel", "swell", "--radio", "cc2538",
                "--threshold", "-90", "--seed", "3", "--packets", "400",
                "--path-loss", "80", "--loss", "bernoulli:0.3")
        p1, p2 = tmp_path / "l1.csv", tmp_path / "l2.csv"
        assert run_cli(*args, "--out", str(p1)) == 0
        assert run_cli(*args, "--out", str(p2)) == 0
        assert p1.read_bytes() == p2.read_bytes()


class TestConfigFile:
    def test_config_supplies_defaults_flags_win(self, tmp_path):
        cfg = tmp_path / "sim.cfg"
        cfg.write_text("channel = ripple\npackets = 300\nseed = 9\n")
        out = tmp_path / "sim.csv"
        rc = run_cli("simulate", "--config", str(cfg), "--packets", "200",
                     "--out", str(out))
        assert rc == 0
        assert len(out.read_text().strip().split("\n")) == 201

    def test_unknown_config_key_rejected(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("warp_speed = 9\n")
        assert run_cli("simulate", "--config", str(cfg), "--out",
                       str(tmp_path / "x.csv")) == 1


class TestExitCodes:
    def test_missing_required_flag(self):
        assert run_cli("acf") == 1

    def test_unknown_flag(self):
        assert run_cli("acf", "--frobnicate") == 1

    def test_missing_input_file(self, tmp_path):
        assert run_cli("acf", "--in", str(tmp_path / "nope.csv")) == 2

    def test_validation_error_from_library(self, trace_csv):
        # Lag grid mismatch surfaces as a validation failure.
        assert run_cli("evaluate", "--in", str(trace_csv), "--method",
                       "orthonormal", "--lags", "0", "--out", "/tmp/x") == 1

    def test_success_is_zero(self, trace_csv, tmp_path):
        assert run_cli("acf", "--in", str(trace_csv), "--max-lag", "5",
                       "--out", str(tmp_path / "a.csv")) == 0


class TestEntryPoint:
    def test_module_invocation(self, tmp_path):
        out = tmp_path / "m.csv"
        proc = subprocess.run(
            [sys.executable, "-m", "rssikit", "simulate", "--channel", "ar2",
             "--packets", "50", "--seed", "1", "--out", str(out)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert out.exists()
