import numpy as np
import pytest

import ulhedge as uh
from ulhedge import rng
from ulhedge.filtering import run_filter
from ulhedge.simulate import (
    advance_market,
    draw_brownian_increments,
    innovation_increments,
    sample_death_time,
    simulate_paths,
)

from conftest import assert_within_se, make_config

# frozen oracle values
GBM_MEAN_5PCT = 1.0512710963760241       # exp(0.05), lognormal mean, mu = 5%
EXP_SURVIVAL_HALF = 0.6065306597126334   # exp(-0.5), constant hazard 0.05 over T=10


class TestPricePaths:
    def test_driftless_price_mean(self):
        cfg = make_config(m0=0.0, sigma=0.2, n_paths=100_000, n_steps=50)
        b = simulate_paths(cfg, "P")
        s_T = b.S[:, -1]
        assert_within_se(s_T.mean(), 1.0, s_T.std(ddof=1) / np.sqrt(cfg.n_paths),
                         label="driftless mean")

    def test_degenerate_factor_is_constant(self):
        cfg = make_config(factor=uh.FrozenFactor(), x0=0.37, n_paths=50)
        b = simulate_paths(cfg, "P")
        assert np.all(b.X == 0.37)

    def test_gbm_mean_oracle(self):
        cfg = make_config(m0=0.05, sigma=0.2, n_paths=100_000, n_steps=50)
        b = simulate_paths(cfg, "P")
        s_T = b.S[:, -1]
        assert_within_se(s_T.mean(), GBM_MEAN_5PCT,
                         s_T.std(ddof=1) / np.sqrt(cfg.n_paths), label="GBM mean")

    def test_price_positive_and_martingale_under_phat(self):
        cfg = make_config(m0=0.08, m1=0.5, sigma=0.25, rho=0.6,
                          factor=uh.OUFactor(1.0, 0.05, 0.2),
                          n_paths=40_000, n_steps=60, seed=5)
        b = simulate_paths(cfg, "P_hat")
        assert np.all(b.S > 0)
        means = b.S.mean(axis=0)
        ses = b.S.std(axis=0, ddof=1) / np.sqrt(cfg.n_paths)
        z = np.abs(means[1:] - 1.0) / ses[1:]
        assert z.max() <= 3.0, f"max z = {z.max():.2f}"


class TestSurvivalMachinery:
    def test_survival_equals_exp_cumhazard(self):
        cfg = make_config(factor=uh.OUFactor(1.0, 0.1, 0.3),
                          gamma=uh.AffineGamma(0.02, 0.7), n_paths=200)
        b = simulate_paths(cfg, "P")
        assert np.abs(b.Y - np.exp(-b.Gamma)).max() <= 1e-12
        assert np.all(np.diff(b.Gamma, axis=1) >= 0)
        assert np.all(np.diff(b.Y, axis=1) <= 1e-15)

    def test_zero_hazard_never_kills(self):
        cfg = make_config(gamma=uh.ConstantGamma(0.0), n_paths=500)
        b = simulate_paths(cfg, "P")
        assert np.all(np.isinf(b.tau))
        assert np.all(b.H == 0.0)

    def test_constant_hazard_survival_fraction(self):
        cfg = make_config(gamma=uh.ConstantGamma(0.05), maturity=10.0,
                          n_steps=200, n_paths=100_000, seed=9)
        b = simulate_paths(cfg, "P")
        surv = np.isinf(b.tau).mean()
        se = np.sqrt(EXP_SURVIVAL_HALF * (1 - EXP_SURVIVAL_HALF) / cfg.n_paths)
        assert_within_se(surv, EXP_SURVIVAL_HALF, se, label="exp survival")

    def test_zero_exponential_draw_rejected(self):
        with pytest.raises(ValueError):
            sample_death_time(np.linspace(0, 1, 5), np.zeros((1, 5)), np.array([0.0]))

    def test_unit_exponential_strictly_positive(self):
        class ZeroFirst:
            def __init__(self):
                self.calls = 0

            def random(self):
                self.calls += 1
                return 0.0 if self.calls == 1 else 0.5

        gen = ZeroFirst()
        assert rng.unit_exponential(gen) > 0.0
        assert gen.calls == 2

    def test_death_indicator_consistency(self):
        cfg = make_config(gamma=uh.ConstantGamma(0.3), maturity=2.0,
                          n_steps=40, n_paths=2000, seed=3)
        b = simulate_paths(cfg, "P")
        dead = np.isfinite(b.tau)
        assert np.all(np.diff(b.H, axis=1) >= 0)
        assert np.all(np.isin(b.H, (0.0, 1.0)))
        jumps = np.sum(np.diff(b.H, axis=1) == 1.0, axis=1)
        assert np.all(jumps[dead] == 1) and np.all(jumps[~dead] == 0)
        k = b.death_step()
        assert np.allclose(b.tau[dead], b.t_grid[k[dead]])
        # tau is the first grid time with Gamma >= draw: H matches the crossing
        assert np.all(b.H[:, 0] == 0.0)

    def test_jump_martingale_telescopes(self):
        cfg = make_config(factor=uh.CIRFactor(1.0, 0.08, 0.3),
                          gamma=uh.LinearGamma(), maturity=4.0,
                          n_steps=80, n_paths=3000, seed=6,
                          grid=uh.PdeGrid(200, 40, 5.0, -0.1, 0.6))
        b = simulate_paths(cfg, "P")
        sv = b.stopped()
        dM = sv.jump_martingale_increments()
        k = b.death_step()
        rows = np.arange(b.n_paths)
        expected = b.H[rows, k] - b.Gamma[rows, k]
        assert np.abs(dM.sum(axis=1) - expected).max() <= 1e-12

    def test_jump_martingale_mean_zero(self):
        cfg = make_config(gamma=uh.ConstantGamma(0.05), maturity=10.0,
                          n_steps=200, n_paths=100_000, seed=9)
        b = simulate_paths(cfg, "P")
        m_T = b.stopped().jump_martingale_increments().sum(axis=1)
        assert_within_se(m_T.mean(), 0.0, m_T.std(ddof=1) / np.sqrt(cfg.n_paths),
                         label="E[M_(T^tau)]")


class TestStoppedView:
    def test_paths_frozen_after_death(self):
        cfg = make_config(gamma=uh.ConstantGamma(0.5), maturity=3.0,
                          n_steps=30, n_paths=400, seed=2)
        b = simulate_paths(cfg, "P")
        sv = b.stopped()
        k = b.death_step()
        for i in np.where(np.isfinite(b.tau))[0][:20]:
            assert np.all(sv.S[i, k[i]:] == sv.S[i, k[i]])
            assert np.all(sv.X[i, k[i]:] == sv.X[i, k[i]])
            assert np.all(sv.W[i, k[i]:] == sv.W[i, k[i]])


class TestDeterminismAndRefinement:
    def test_seed_determinism_bit_identical(self):
        cfg = make_config(m0=0.02, m1=0.4, rho=0.5,
                          factor=uh.OUFactor(1.0, 0.05, 0.2),
                          gamma=uh.AffineGamma(0.01, 0.5), n_paths=300)
        b1 = simulate_paths(cfg, "P")
        b2 = simulate_paths(cfg, "P")
        for name in ("S", "X", "W", "B", "Gamma", "H"):
            assert np.array_equal(getattr(b1, name), getattr(b2, name)), name
        assert np.array_equal(b1.tau, b2.tau, equal_nan=True)

    def test_worker_count_independence(self):
        cfg = make_config(m1=0.4, factor=uh.OUFactor(1.0, 0.05, 0.2), n_paths=64)
        b1 = simulate_paths(cfg, "P", workers=1)
        b2 = simulate_paths(cfg, "P", workers=3)
        assert np.array_equal(b1.S, b2.S) and np.array_equal(b1.X, b2.X)

    def test_chunked_matches_full(self):
        cfg = make_config(m1=0.4, factor=uh.OUFactor(1.0, 0.05, 0.2), n_paths=40)
        full = simulate_paths(cfg, "P")
        part = simulate_paths(cfg, "P", path_indices=np.arange(10, 20))
        assert np.array_equal(full.S[10:20], part.S)

    def test_strong_refinement_order(self):
        # common Brownian increments, coarsened by pairwise summation
        cfg_fine = make_config(m0=0.02, m1=0.5, sigma=0.2, rho=0.5,
                               factor=uh.OUFactor(1.2, 0.05, 0.25),
                               n_steps=512, n_paths=400, seed=11)
        dW, dB = draw_brownian_increments(cfg_fine.seed, np.arange(400), 512,
                                          cfg_fine.dt)
        S_ref, X_ref = advance_market(cfg_fine, dW, dB, "P")
        errors = []
        for n in (64, 128, 256):
            factor = 512 // n
            dW_c = dW.reshape(400, n, factor).sum(axis=2)
            dB_c = dB.reshape(400, n, factor).sum(axis=2)
            cfg_n = cfg_fine.with_updates(n_steps=n)
            S_n, X_n = advance_market(cfg_n, dW_c, dB_c, "P")
            err = np.mean(np.abs(S_n[:, -1] - S_ref[:, -1])
                          + np.abs(X_n[:, -1] - X_ref[:, -1]))
            errors.append(err)
        errors = np.array(errors)
        assert np.all(np.diff(errors) < 0), f"errors not decreasing: {errors}"
        slope = np.polyfit(np.log([64, 128, 256]), np.log(errors), 1)[0]
        assert slope <= -0.45, f"strong order too low: slope {slope:.2f}"


class TestInnovation:
    def test_zero_drift_innovation_equals_brownian(self):
        cfg = make_config(m0=0.0, n_paths=50)
        b = simulate_paths(cfg, "P")
        dI = innovation_increments(b, np.zeros((50, cfg.n_steps)))
        assert np.array_equal(dI, np.diff(b.W, axis=1) * b.alive_mask())

    def test_observable_drift_projection_is_identity(self):
        # mu depends on (t, s) only: the projection equals mu itself and the
        # innovation increments coincide with the Brownian ones
        cfg = make_config(m0=0.04, m1=0.0, gamma=uh.ConstantGamma(0.1),
                          factor=uh.OUFactor(1.0, 0.05, 0.2), n_paths=20,
                          n_particles=50, seed=8)
        b = simulate_paths(cfg, "P")
        series = run_filter(cfg, b.S, world_indices=b.path_indices)
        pfs = series.estimates["proj_mu"][:, :-1]
        assert np.abs(pfs - 0.04).max() <= 1e-12
        dI = innovation_increments(b, pfs)
        assert np.abs(dI - np.diff(b.W, axis=1) * b.alive_mask()).max() <= 1e-12

    def test_grid_mismatch_rejected(self):
        cfg = make_config(n_paths=4)
        b = simulate_paths(cfg, "P")
        with pytest.raises(ValueError):
            innovation_increments(b, np.zeros((4, cfg.n_steps - 1)))

    def test_innovation_quadratic_variation(self):
        cfg = make_config(m0=0.03, m1=0.5, sigma=0.2,
                          factor=uh.OUFactor(1.5, 0.06, 0.15),
                          gamma=uh.ConstantGamma(0.15), x0=0.06,
                          n_paths=10_000, n_steps=100, n_particles=120, seed=17)
        b = simulate_paths(cfg, "P")
        series = run_filter(cfg, b.S, world_indices=b.path_indices,
                            n_particles=cfg.n_particles)
        dI = innovation_increments(b, series.estimates["proj_mu"][:, :-1])
        I_T = dI.sum(axis=1)
        stopped_time = np.minimum(np.where(np.isfinite(b.tau), b.tau, np.inf),
                                  cfg.maturity)
        target = stopped_time.mean()
        sq = I_T**2
        assert_within_se(sq.mean(), target,
                         np.hypot(sq.std(ddof=1), stopped_time.std(ddof=1))
                         / np.sqrt(cfg.n_paths),
                         label="innovation QV")
