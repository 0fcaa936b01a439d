import json
import subprocess
import sys

import pytest

from fibered_dyn.cli import (CONFIG_SCHEMA, ConfigError, config_hash, main, resolve_config)

DEGENERATE = {
    "d": 2,
    # Theta0 = y0^2 and Theta1 = y0 y1 share the factor y0
    "theta0": {"degree": 2, "coeffs": [[1, 0], [0, 0], [0, 0]]},
    "theta1": {"degree": 2, "coeffs": [[0, 0], [1, 0], [0, 0]]},
    "R": {"degree": 2, "terms": [{"exp": [0, 0, 2], "c": [1, 0]}]},
    "name": "degenerate",
}


def run_cli(tmp_path, command, cfg, *flags):
    cfg_path = tmp_path / f"{command}.cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    status = main([command, "--config", str(cfg_path), "--out", str(out), *flags])
    report_path = out / f"{command}.json"
    report = json.loads(report_path.read_text()) if report_path.exists() else None
    return status, report, out


class TestConfig:
    def test_unknown_key(self, tmp_path):
        status, report, _ = run_cli(tmp_path, "bj-check", {"map": "torus", "Nsamples": 10})
        assert status == 2 and report is None

    def test_bad_type(self, tmp_path):
        status, _, _ = run_cli(tmp_path, "bj-check", {"map": "torus", "N": "many"})
        assert status == 2

    def test_unknown_builtin(self, tmp_path):
        status, report, _ = run_cli(tmp_path, "validate", {"map": "no_such_map"})
        assert status == 2
        assert "no_such_map" in report["error"]

    def test_missing_map(self):
        with pytest.raises(ConfigError):
            resolve_config("lyapunov", {}, environ={})

    def test_unreadable(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["validate", "--config", str(bad)]) == 2

    def test_seed_precedence(self):
        cfg = {"map": "torus", "seed": 1}
        assert resolve_config("lyapunov", cfg, environ={})["seed"] == 1
        env = {"FIBERED_DYN_SEED": "7", "FIBERED_DYN_WORKERS": "3"}
        merged = resolve_config("lyapunov", cfg, environ=env)
        assert merged["seed"] == 7 and merged["workers"] == 3
        assert resolve_config("lyapunov", cfg, seed=9, workers=2, environ=env)["seed"] == 9

    def test_bad_env(self):
        with pytest.raises(ConfigError):
            resolve_config("lyapunov", {"map": "torus"}, environ={"FIBERED_DYN_SEED": "x"})

    def test_defaults_merge(self):
        merged = resolve_config("bif-scan", {"family": "mandel_family", "grid": {"nx": 8}},
                                environ={})
        assert merged["grid"] == {"nx": 8} and merged["method"] == "direct"

    def test_hash_ignores_out_and_workers(self):
        a = resolve_config("lyapunov", {"map": "torus"}, out="a", workers=1, environ={})
        b = resolve_config("lyapunov", {"map": "torus"}, out="b", workers=4, environ={})
        c = resolve_config("lyapunov", {"map": "torus"}, seed=5, environ={})
        assert config_hash(a) == config_hash(b) != config_hash(c)

    def test_schema_closed(self):
        assert CONFIG_SCHEMA["additionalProperties"] is False


class TestCommands:
    def test_bj_check_torus(self, tmp_path):
        status, report, _ = run_cli(tmp_path, "bj-check", {"map": "torus", "N": 20_000})
        assert status == 0
        assert abs(report["results"]["discrepancy"]["value"]) <= 2e-3
        assert report["config_hash"] and report["version"] and report["seed"] == 0

    def test_validate_degenerate(self, tmp_path):
        status, report, _ = run_cli(tmp_path, "validate", {"map": DEGENERATE})
        assert status == 3
        assert "resultant" in report["error"]

    def test_validate_builtin(self, tmp_path):
        status, report, _ = run_cli(tmp_path, "validate", {"map": "desboves"})
        assert status == 0

    def test_decomp_check(self, tmp_path):
        status, report, _ = run_cli(tmp_path, "decomp-check", {"map": "cheb_coupled"})
        assert status == 0
        for row in report["results"]["functions"]:
            assert {"value", "se"} <= set(row["direct"]) and {"value", "se"} <= set(row["nested"])

    def test_lyapunov(self, tmp_path):
        status, report, _ = run_cli(tmp_path, "lyapunov", {"map": "cheb_coupled", "N": 10_000})
        assert status == 0
        for key in ("lambda_f", "lambda_theta", "lambda_sigma"):
            assert "se" in report["results"][key]

    def test_periodic_check_torus(self, tmp_path):
        status, report, _ = run_cli(tmp_path, "periodic-check",
                                    {"map": "torus", "N": 10_000, "n_list": [4, 6, 8],
                                     "gap_tol": 0.01})
        assert status == 0
        gaps = [r["gap"] for r in report["results"]["periodic"]]
        assert gaps[-1] < 0.01

    def test_periodic_check_band_failure(self, tmp_path):
        # n = 2 leaves a gap of log(2)/4 against the direct value, far outside 1e-3
        status, _, _ = run_cli(tmp_path, "periodic-check",
                               {"map": "torus", "N": 10_000, "n_list": [2], "gap_tol": 0.001})
        assert status == 1

    def test_green_artifacts(self, tmp_path):
        cfg = {"map": "torus", "base_point": [1.0, 0.0], "grid": {"nx": 8}}
        status, report, out = run_cli(tmp_path, "green", cfg)
        assert status == 0
        lines = (out / "green.csv").read_text().splitlines()
        assert lines[0] == "x_index,y_index,value,bound" and len(lines) == 65
        assert (out / "green.pgm").read_bytes().startswith(b"P5\n8 8\n")
        assert "truncation_bound" in report["results"]["max"]

    def test_sample_fiber(self, tmp_path):
        cfg = {"map": "torus", "N": 500, "measure": "fiber", "base_point": [0.0, 1.0]}
        status, report, out = run_cli(tmp_path, "sample", cfg)
        assert status == 0
        rows = (out / "sample.csv").read_text().splitlines()
        assert rows[0].split(",")[-1] == "weight" and len(rows) == 501

    def test_bif_scan(self, tmp_path):
        cfg = {"family": "mandel_family", "N": 1000, "grid": {"nx": 8},
               "bump": {"center": [-0.5, 0.0], "radius": 1.0}}
        status, report, out = run_cli(tmp_path, "bif-scan", cfg)
        assert status in (0, 1)
        res = report["results"]
        assert {"value", "se"} <= set(res["bump_pairing"])
        assert (out / "scan.csv").exists() and (out / "density.pgm").exists()

    def test_bif_scan_inline_family(self, tmp_path):
        fam = {"p": {"2": [[1, 0]]}, "q": {"0,2": [[1, 0]], "0,0": [[0, 0], [0.1, 0]]},
               "rect": [-0.5, 0.5, -0.5, 0.5], "name": "inline_quiet"}
        status, report, _ = run_cli(tmp_path, "bif-scan", {"family": fam, "n": 3,
                                                           "grid": {"nx": 6}})
        assert status == 0
        assert report["results"]["family"] == "inline_quiet"


class TestDeterminism:
    def test_byte_identical_csv(self, tmp_path):
        cfg = {"map": "cheb_coupled", "N": 300, "seed": 11}
        runs = []
        for k in range(2):
            sub = tmp_path / str(k)
            sub.mkdir()
            status, _, out = run_cli(sub, "sample", cfg)
            assert status == 0
            runs.append((out / "sample.csv").read_bytes())
        assert runs[0] == runs[1]

    def test_scan_csv_identical(self, tmp_path):
        cfg = {"family": "coupled_family", "N": 500, "grid": {"nx": 5}, "pgm": False}
        outs = []
        for k in range(2):
            sub = tmp_path / str(k)
            sub.mkdir()
            run_cli(sub, "bif-scan", cfg)
            outs.append((sub / "out" / "scan.csv").read_bytes())
        assert outs[0] == outs[1]


def test_console_entry_point(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"map": "torus"}))
    proc = subprocess.run([sys.executable, "-m", "fibered_dyn.cli", "validate", "--config", str(cfg),
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert (tmp_path / "validate.json").exists()
