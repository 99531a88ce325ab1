import json
import os

import numpy as np
import pytest

import ulhedge as uh
from ulhedge.cli import main
from ulhedge.config_io import config_hash, dump_config, load_config, parse_config
from ulhedge.csvio import (
    export_bundle,
    export_hedge_report,
    export_projection_series,
    read_matrix,
)
from ulhedge.filtering import run_filter
from ulhedge.hedging import backtest
from ulhedge.simulate import simulate_paths

SMALL_CONFIG = """
[run]
seed = 77
n_steps = 40
n_paths = 60
n_particles = 50
s0 = 1.0
x0 = 0.05
c_bound = 5.0

[price]
sigma = 0.25
m0 = 0.02
m1 = 0.8
rho = 0.4

[factor]
family = cir
kappa = 1.0
xbar = 0.05
a = 0.2

[gamma]
family = affine
gamma0 = 0.02
gamma1 = 1.0

[contract]
maturity = 1.0
survival_payoff = call
strike = 1.0
death_recovery = linear
recovery_slope = 0.2

[pde_grid]
n_s = 150
n_x = 40
s_max = 6.0
x_min = -0.08
x_max = 0.5
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "scenario.ini"
    path.write_text(SMALL_CONFIG)
    return str(path)


class TestConfigIO:
    def test_parse_and_validate(self, config_file):
        cfg = load_config(config_file)
        assert cfg.seed == 77
        assert uh.validate(cfg).ok
        assert isinstance(cfg.coefficients.factor, uh.CIRFactor)

    def test_unknown_key_rejected(self):
        with pytest.raises(uh.ConfigError):
            parse_config(SMALL_CONFIG + "\n[run]\nbogus = 1\n")
        with pytest.raises(uh.ConfigError):
            parse_config(SMALL_CONFIG.replace("[price]", "[prices]"))

    def test_missing_section_rejected(self):
        text = SMALL_CONFIG.replace("[factor]", "[gamma]").replace("family = cir", "family = constant")
        with pytest.raises(uh.ConfigError):
            parse_config(text)

    def test_round_trip(self):
        cfg = parse_config(SMALL_CONFIG)
        again = parse_config(dump_config(cfg))
        assert config_hash(cfg) == config_hash(again)


class TestArtifacts:
    def test_bundle_round_trip(self, tmp_path):
        cfg = parse_config(SMALL_CONFIG)
        bundle = simulate_paths(cfg, "P")
        files = export_bundle(bundle, tmp_path)
        for f in files:
            h, cols, data = read_matrix(f)
            assert h == config_hash(cfg)
        _, _, s_back = read_matrix(os.path.join(tmp_path, "paths_S.csv"))
        assert np.allclose(s_back, bundle.S, rtol=0, atol=0)

    def test_projection_series_round_trip(self, tmp_path):
        cfg = parse_config(SMALL_CONFIG).with_updates(n_paths=3)
        bundle = simulate_paths(cfg, "P")
        series = run_filter(cfg, bundle.S, world_indices=bundle.path_indices)
        files = export_projection_series(series, cfg, tmp_path)
        _, _, hz = read_matrix(os.path.join(tmp_path, "filter_hazard.csv"))
        assert np.allclose(hz, series.estimates["hazard"], rtol=0, atol=0)
        assert any(f.endswith("_se.csv") for f in files)

    def test_hedge_report_round_trip(self, tmp_path):
        cfg = parse_config(SMALL_CONFIG)
        report = backtest(cfg)
        files = export_hedge_report(report, tmp_path)
        _, _, theta = read_matrix(os.path.join(tmp_path, "hedge_theta_star.csv"))
        assert np.allclose(theta, report.series.theta_star, rtol=0, atol=0)
        assert os.path.exists(os.path.join(tmp_path, "hedge_summary.csv"))
        assert len(files) == 9


class TestCli:
    def test_simulate_writes_manifest(self, config_file, tmp_path):
        out = tmp_path / "out"
        code = main(["simulate", config_file, "--out-dir", str(out), "--quiet"])
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        for name in manifest["outputs"]:
            assert (out / name).exists(), name
        cfg = load_config(config_file)
        assert manifest["config_hash"] == config_hash(cfg)
        assert manifest["seed"] == cfg.seed

    def test_solve_and_filter_and_closed_form(self, config_file, tmp_path):
        assert main(["solve", config_file, "--out-dir", str(tmp_path / "a"),
                     "--quiet"]) == 0
        assert main(["filter", config_file, "--paths", "2",
                     "--out-dir", str(tmp_path / "b"), "--quiet"]) == 0
        # closed-form refuses the correlated scenario with exit code 2
        assert main(["closed-form", config_file,
                     "--out-dir", str(tmp_path / "c"), "--quiet"]) == 2

    def test_hedge_zero_paths_is_config_error(self, config_file, tmp_path, capsys):
        code = main(["hedge", config_file, "--paths", "0",
                     "--out-dir", str(tmp_path), "--quiet"])
        assert code == 2
        assert "n_paths must be >= 1" in capsys.readouterr().err

    def test_bad_config_file(self, tmp_path):
        bad = tmp_path / "bad.ini"
        bad.write_text("[run\nseed")
        assert main(["simulate", str(bad), "--out-dir", str(tmp_path)]) == 2

    def test_numerical_failure_exits_three(self, tmp_path, capsys):
        # PDE domain far too small: paths leave it and the hedge run aborts
        text = SMALL_CONFIG.replace("s_max = 6.0", "s_max = 1.2")
        path = tmp_path / "tight.ini"
        path.write_text(text)
        code = main(["hedge", str(path), "--out-dir", str(tmp_path), "--quiet"])
        assert code == 3
        assert "hedge" in capsys.readouterr().err

    def test_worker_count_leaves_outputs_identical(self, config_file, tmp_path):
        outs = []
        for tag, workers in (("w1", "1"), ("w2", "2")):
            out = tmp_path / tag
            assert main(["simulate", config_file, "--out-dir", str(out),
                         "--workers", workers, "--quiet"]) == 0
            outs.append(out)
        for name in sorted(os.listdir(outs[0])):
            if name == "manifest.json":
                continue
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()

    def test_hedge_emits_summary(self, config_file, tmp_path):
        out = tmp_path / "h"
        assert main(["hedge", config_file, "--out-dir", str(out), "--quiet"]) == 0
        assert (out / "hedge_summary.csv").exists()
        assert (out / "manifest.json").exists()

    def test_byte_identical_reruns(self, config_file, tmp_path):
        outs = []
        for tag in ("r1", "r2"):
            out = tmp_path / tag
            assert main(["simulate", config_file, "--out-dir", str(out),
                         "--quiet"]) == 0
            outs.append(out)
        for name in sorted(os.listdir(outs[0])):
            if name == "manifest.json":  # carries wall-clock timings
                continue
            b1 = (outs[0] / name).read_bytes()
            b2 = (outs[1] / name).read_bytes()
            assert b1 == b2, name

    def test_closed_form_on_uncorrelated_config(self, tmp_path):
        text = SMALL_CONFIG.replace("rho = 0.4", "rho = 0.0")
        path = tmp_path / "u.ini"
        path.write_text(text)
        out = tmp_path / "cf"
        assert main(["closed-form", str(path), "--out-dir", str(out),
                     "--quiet"]) == 0
        assert (out / "closed_form_theta_star.csv").exists()


class TestVerifyCommand:
    def test_verify_wiring_and_exit_codes(self, config_file, tmp_path, monkeypatch):
        # the full criteria run in test_acceptance; here the command wiring is
        # exercised against stub criteria so both exit branches are covered
        from ulhedge import acceptance
        from ulhedge.acceptance import CriterionResult

        def passing(seed):
            return CriterionResult(1, "stub", True, 0.0, ["ok  stub"])

        def failing(seed):
            return CriterionResult(2, "stub-fail", False, 0.0, ["BAD stub"])

        monkeypatch.setattr(acceptance, "CRITERIA", [passing])
        out = tmp_path / "v1"
        assert main(["verify", config_file, "--out-dir", str(out), "--quiet"]) == 0
        summary = (out / "acceptance_summary.txt").read_text()
        assert "[PASS] criterion 1: stub" in summary

        monkeypatch.setattr(acceptance, "CRITERIA", [passing, failing])
        assert main(["verify", config_file, "--out-dir", str(tmp_path / "v2"),
                     "--quiet"]) == 1


class TestClosedFormVersusHedge:
    def test_pipelines_agree(self, tmp_path):
        text = SMALL_CONFIG.replace("rho = 0.4", "rho = 0.0") \
                           .replace("family = affine", "family = linear") \
                           .replace("n_particles = 50", "n_particles = 3000") \
                           .replace("n_paths = 60", "n_paths = 30") \
                           .replace("n_steps = 40", "n_steps = 80") \
                           .replace("n_s = 150", "n_s = 400")
        cfg = parse_config(text)
        bundle = simulate_paths(cfg, "P")
        from ulhedge.hedging import closed_form_theta, hedge_paths
        from ulhedge.pde import solve_g
        series = hedge_paths(cfg, bundle, solve_g(cfg))
        th_cf, _, _ = closed_form_theta(cfg, bundle)
        mask = bundle.alive_mask() > 0
        rel = np.abs(series.theta_star - th_cf)[mask] \
            / np.maximum(np.abs(th_cf[mask]), 0.05)
        assert rel.max() <= 0.02
