import numpy as np
import pytest

import ulhedge as uh
from ulhedge.filtering import init_cloud
from ulhedge.hedging import (
    backtest,
    closed_form_theta,
    cost_process,
    eta_from,
    hedge_paths,
    payment_stream,
    theta_full,
    trading_gains,
)
from ulhedge.oracles import black_scholes_delta
from ulhedge.pde import interp_rows, solve_g, solve_gtilde
from ulhedge.simulate import simulate_paths

from conftest import assert_within_se, make_config

CIR_GRID = uh.PdeGrid(n_s=300, n_x=50, s_max=6.0, x_min=-0.08, x_max=0.5)


def cir_scenario(**kw):
    kw.setdefault("factor", uh.CIRFactor(1.0, 0.05, 0.2))
    kw.setdefault("gamma", uh.AffineGamma(0.02, 1.0))
    kw.setdefault("m0", 0.02)
    kw.setdefault("m1", 0.8)
    kw.setdefault("sigma", 0.25)
    kw.setdefault("rho", 0.4)
    kw.setdefault("x0", 0.05)
    kw.setdefault("grid", CIR_GRID)
    return make_config(**kw)


class TestPaymentStream:
    def test_structure(self):
        cfg = cir_scenario(survival=uh.CallPayoff(1.0),
                           recovery=uh.LinearPayoff(0.2),
                           gamma=uh.ConstantGamma(0.4), maturity=2.0,
                           n_steps=50, n_paths=3000, seed=51)
        b = simulate_paths(cfg, "P")
        ps = payment_stream(b)
        died = np.isfinite(b.tau)
        k = b.death_step()
        rows = np.arange(b.n_paths)
        # at most one jump, located at the death time
        jumps = np.diff(ps.N, axis=1)
        assert np.all((jumps != 0).sum(axis=1) <= 1)
        s_death = b.S[rows[died], k[died]]
        assert np.allclose(ps.N[died, -1], 0.2 * s_death)
        surv = ~died
        assert np.allclose(ps.N[surv, -1],
                           np.maximum(b.S[surv, -1] - 1.0, 0.0))
        assert np.array_equal(ps.terminal, ps.N[:, -1])

    def test_degenerate_contracts(self):
        cfg = cir_scenario(survival=uh.CallPayoff(1.0), recovery=uh.ZeroRecovery,
                           gamma=uh.ConstantGamma(0.3), n_paths=500, seed=52)
        term = payment_stream(simulate_paths(cfg, "P"))
        died = np.isfinite(simulate_paths(cfg, "P").tau)
        assert np.all(term.terminal[died] == 0.0)

        cfg2 = cfg.with_updates(contract=uh.Contract(
            1.0, uh.ConstantPayoff(0.0), uh.LinearPayoff(0.2)))
        pure = payment_stream(simulate_paths(cfg2, "P"))
        assert np.all(pure.terminal[~died] == 0.0)


class TestThetaFull:
    def test_affine_contract_constant_slope(self):
        cfg = cir_scenario(survival=uh.LinearPayoff(0.5),
                           recovery=uh.LinearPayoff(0.5), n_paths=40, seed=53)
        b = simulate_paths(cfg, "P")
        th = theta_full(b, solve_g(cfg))
        assert np.abs(th[b.alive_mask() > 0] - 0.5).max() <= 1e-10

    def test_black_scholes_delta(self):
        cfg = make_config(m0=0.02, m1=0.3, sigma=0.2, rho=0.0,
                          factor=uh.OUFactor(1.0, 0.05, 0.1), x0=0.05,
                          grid=uh.PdeGrid(1000, 40, 5.0, -0.5, 0.6),
                          n_steps=200, n_paths=30, seed=54)
        b = simulate_paths(cfg, "P")
        th = theta_full(b, solve_g(cfg))
        t_left = b.t_grid[:-1][None, :]
        oracle = black_scholes_delta(b.S[:, :-1], 1.0, 0.2, 1.0 - t_left)
        # relative delta accuracy is checked away from the terminal kink
        # (time-to-maturity >= 0.05) and where the delta is meaningfully sized
        mask = (oracle >= 0.05) & (oracle <= 0.995) & (1.0 - t_left >= 0.05)
        rel = np.abs(th - oracle)[mask] / oracle[mask]
        assert rel.max() <= 0.01

    def test_two_route_consistency_uncorrelated(self):
        # 2D solve against the product form (survival-benefit price times the
        # survival transform) along simulated paths
        cfg = make_config(m0=0.03, m1=0.5, sigma=0.2, rho=0.0,
                          factor=uh.CIRFactor(1.2, 0.06, 0.25),
                          gamma=uh.LinearGamma(),
                          recovery=uh.LinearPayoff(0.2), x0=0.06,
                          grid=uh.PdeGrid(500, 60, 6.0, -0.08, 0.6),
                          n_paths=50, seed=55)
        b = simulate_paths(cfg, "P")
        th = theta_full(b, solve_g(cfg))
        th_cf, gtilde, phi = closed_form_theta(cfg, b)
        # full-information closed form replaces the survival mass by Phi(t, X_t)
        delta = 0.2
        th2 = np.zeros_like(th)
        for k in range(cfg.n_steps):
            gs = gtilde.value_ds(k, s=b.S[:, k])
            ph = phi.value(k, x=b.X[:, k])
            th2[:, k] = (gs - delta) * ph + delta
        th2 *= b.alive_mask()
        mask = b.alive_mask() > 0
        rel = np.abs(th - th2)[mask] / np.maximum(np.abs(th2[mask]), 0.05)
        assert rel.max() <= 0.01

    def test_domain_excursion_reports(self):
        cfg = cir_scenario(grid=uh.PdeGrid(100, 30, 1.3, -0.08, 0.5),
                           n_paths=200, seed=56)
        b = simulate_paths(cfg, "P")
        sol = solve_g(cfg)
        with pytest.raises(uh.DomainExcursionError):
            theta_full(b, sol)


class TestThetaPartial:
    def test_dirac_equals_full_information(self):
        cfg = make_config(m0=0.03, m1=0.5, sigma=0.2, rho=0.0,
                          factor=uh.FrozenFactor(),
                          gamma=uh.ConstantGamma(0.05),
                          recovery=uh.LinearPayoff(0.2), x0=0.04,
                          grid=uh.PdeGrid(400, 8, 5.0, -0.1, 0.1),
                          n_paths=50, n_particles=64, seed=57)
        b = simulate_paths(cfg, "P")
        series = hedge_paths(cfg, b, solve_g(cfg))
        assert np.abs(series.theta_star - series.theta_full).max() <= 1e-12

    def test_affine_contract_constant_slope(self):
        cfg = cir_scenario(survival=uh.LinearPayoff(0.5),
                           recovery=uh.LinearPayoff(0.5),
                           n_paths=40, n_particles=200, seed=58)
        b = simulate_paths(cfg, "P")
        series = hedge_paths(cfg, b, solve_g(cfg))
        th = series.theta_star[b.alive_mask() > 0]
        assert np.abs(th - 0.5).max() <= 1e-10

    def test_closed_form_agreement(self):
        cfg = make_config(m0=0.03, m1=0.5, sigma=0.2, rho=0.0,
                          factor=uh.CIRFactor(1.2, 0.06, 0.25),
                          gamma=uh.LinearGamma(),
                          recovery=uh.LinearPayoff(0.2), x0=0.06,
                          grid=uh.PdeGrid(500, 60, 6.0, -0.08, 0.6),
                          n_paths=50, n_steps=100, n_particles=4000, seed=59)
        b = simulate_paths(cfg, "P")
        series = hedge_paths(cfg, b, solve_g(cfg))
        th_cf, _, _ = closed_form_theta(cfg, b)
        mask = b.alive_mask() > 0
        rel = np.abs(series.theta_star - th_cf)[mask] \
            / np.maximum(np.abs(th_cf[mask]), 0.05)
        assert rel.max() <= 0.02

    def test_closed_form_requires_uncorrelated(self):
        cfg = cir_scenario(n_paths=5, seed=60)
        b = simulate_paths(cfg, "P")
        with pytest.raises(uh.ConfigError):
            closed_form_theta(cfg, b)

    def test_measurability_from_observables_alone(self, tmp_path):
        # recompute theta* from the exported price path and death indicator
        # only, mirroring the published formula
        cfg = cir_scenario(n_paths=10, n_particles=150, seed=61)
        b = simulate_paths(cfg, "P")
        g_sol = solve_g(cfg)
        series = hedge_paths(cfg, b, g_sol)

        from ulhedge.csvio import export_bundle, read_matrix
        import os
        export_bundle(b, tmp_path)
        _, _, s_exported = read_matrix(os.path.join(tmp_path, "paths_S.csv"))
        _, _, h_exported = read_matrix(os.path.join(tmp_path, "paths_H.csv"))
        cloud = init_cloud(cfg, s_exported, world_indices=b.path_indices)
        c = cfg.coefficients
        theta = np.zeros((10, cfg.n_steps))
        for k in range(cfg.n_steps):
            s_k = s_exported[:, k]
            Y = cloud.Y
            rows_gs = g_sol.slice_at_s("d_s", k, s_k)
            num = (Y * interp_rows(rows_gs, g_sol.x_grid, cloud.X)).mean(axis=1)
            t = cloud.t
            rows_gx = g_sol.slice_at_s("d_x", k, s_k)
            gx = interp_rows(rows_gx, g_sol.x_grid, cloud.X)
            num = num + c.rho / (c.sigma(t, s_k) * s_k) \
                * (c.a(t, cloud.X) * Y * gx).mean(axis=1)
            theta[:, k] = num / Y.mean(axis=1)
            cloud.step()
        theta *= 1.0 - h_exported[:, :-1]
        assert np.abs(theta - series.theta_star).max() <= 1e-12


class TestValueAndCost:
    def test_initial_value_is_pde_price(self):
        cfg = cir_scenario(n_paths=20, n_particles=100, seed=62)
        b = simulate_paths(cfg, "P")
        g_sol = solve_g(cfg)
        series = hedge_paths(cfg, b, g_sol)
        zeta0 = float(g_sol.value(0, s=np.array([cfg.s0]), x=np.array([cfg.x0]))[0])
        assert np.abs(series.V[:, 0] - zeta0).max() <= 1e-12

    def test_value_zero_after_death_and_cost_jump(self):
        cfg = cir_scenario(gamma=uh.ConstantGamma(0.6), maturity=2.0,
                           n_steps=50, n_paths=400, n_particles=100, seed=63,
                           grid=uh.PdeGrid(300, 50, 8.0, -0.08, 0.5))
        b = simulate_paths(cfg, "P")
        series = hedge_paths(cfg, b, solve_g(cfg))
        C = cost_process(series.N, series.V, series.theta_star, b.stopped().S)
        died = np.where(np.isfinite(b.tau))[0]
        k = b.death_step()
        for i in died[:25]:
            assert series.V[i, k[i]] == 0.0
            # cost jumps by the benefit paid minus the released book value
            jump = C[i, k[i]] - C[i, k[i] - 1]
            paid = series.N[i, k[i]] - series.N[i, k[i] - 1]
            released = series.V[i, k[i] - 1]
            traded = series.theta_star[i, k[i] - 1] \
                * (b.S[i, k[i]] - b.S[i, k[i] - 1])
            assert abs(jump - (paid - released - traded)) <= 1e-12

    def test_black_scholes_replication(self):
        # no mortality, zero recovery, uncorrelated: book value and riskless
        # leg reproduce the replicating portfolio of the survival benefit
        cfg = make_config(m0=0.02, m1=0.3, sigma=0.2, rho=0.0,
                          factor=uh.OUFactor(1.0, 0.05, 0.1), x0=0.05,
                          grid=uh.PdeGrid(1000, 20, 5.0, -0.3, 0.4),
                          n_steps=100, n_paths=30, n_particles=64, seed=64)
        b = simulate_paths(cfg, "P")
        series = hedge_paths(cfg, b, solve_g(cfg))
        gtilde = solve_gtilde(cfg)
        V_oracle = np.empty_like(series.V)
        eta_oracle = np.empty_like(series.V)
        for k in range(cfg.n_steps + 1):
            s_k = b.S[:, k]
            V_oracle[:, k] = gtilde.value(k, s=s_k)
            eta_oracle[:, k] = V_oracle[:, k] - gtilde.value_ds(k, s=s_k) * s_k
        eta = eta_from(series.V, series.theta_star, b.stopped().S)
        sel = (b.S > 0.6) & (b.S < 2.0)
        sel[:, -1] = False  # post-settlement book value is zero by convention
        rel_v = np.abs(series.V - V_oracle)[sel] / np.abs(V_oracle[sel])
        assert rel_v.max() <= 0.01
        scale = np.abs(eta_oracle[sel]).mean()
        rel_e = np.abs(eta - eta_oracle)[sel] / np.maximum(np.abs(eta_oracle[sel]),
                                                           0.05 * scale)
        assert rel_e.max() <= 0.01


class TestBacktest:
    def test_driftless_price_identity(self):
        # mu = 0 makes both measures coincide: the stochastic integral has
        # zero mean and the price identity is the trivial one
        cfg = make_config(m0=0.0, sigma=0.2, rho=0.0,
                          factor=uh.OUFactor(1.0, 0.05, 0.15),
                          gamma=uh.AffineGamma(0.02, 0.5), x0=0.05,
                          recovery=uh.LinearPayoff(0.2),
                          grid=uh.PdeGrid(300, 60, 6.0, -0.85, 0.95),
                          n_steps=100, n_paths=3000, n_particles=150, seed=65)
        rep = backtest(cfg)
        s = rep.summary
        assert abs(s.price_z) <= 3.0
        gains = trading_gains(rep.series.theta_star, rep.S_stopped)[:, -1]
        assert_within_se(gains.mean(), 0.0,
                         gains.std(ddof=1) / np.sqrt(cfg.n_paths),
                         label="driftless trading gains")

    def test_exact_strategy_residual(self):
        cfg = cir_scenario(survival=uh.LinearPayoff(0.5),
                           recovery=uh.LinearPayoff(0.5),
                           n_paths=2000, n_particles=100, seed=66)
        rep = backtest(cfg)
        resid = rep.terminal_residuals
        se = resid.std(ddof=1) / np.sqrt(cfg.n_paths)
        assert abs(resid.mean()) <= max(3 * se, 1e-12)
        # the exact strategy leaves no hedging risk at all
        assert np.abs(resid).max() <= 1e-10

    def test_degenerate_factor_columns_identical(self):
        cfg = make_config(m0=0.03, m1=0.5, sigma=0.2, rho=0.0,
                          factor=uh.FrozenFactor(), gamma=uh.ConstantGamma(0.05),
                          recovery=uh.LinearPayoff(0.2), x0=0.04,
                          grid=uh.PdeGrid(400, 8, 5.0, -0.1, 0.1),
                          n_steps=60, n_paths=300, n_particles=32, seed=67)
        rep = backtest(cfg)
        assert np.abs(rep.series.theta_star - rep.series.theta_full).max() <= 1e-12
        assert np.abs(rep.C - rep.C_full).max() <= 1e-10

    def test_degenerate_contracts_hedge_cleanly(self):
        # pure term insurance (zero recovery) and pure endowment-at-death
        # (zero survival benefit) both run the full pipeline and price right
        base = dict(gamma=uh.ConstantGamma(0.3), maturity=2.0, n_steps=100,
                    n_paths=2000, n_particles=100,
                    grid=uh.PdeGrid(300, 50, 8.0, -0.08, 0.5))
        term = cir_scenario(survival=uh.CallPayoff(1.0),
                            recovery=uh.ZeroRecovery, seed=71, **base)
        pure = cir_scenario(survival=uh.ConstantPayoff(0.0),
                            recovery=uh.LinearPayoff(0.2), seed=72, **base)
        for cfg in (term, pure):
            rep = backtest(cfg)
            assert abs(rep.summary.price_z) <= 3.0
            assert np.abs(rep.summary.cost_z).max() <= 3.5

    def test_generic_scenario_summary(self):
        cfg = cir_scenario(recovery=uh.LinearPayoff(0.2),
                           n_steps=200, n_paths=4000, n_particles=200, seed=68)
        rep = backtest(cfg)
        s = rep.summary
        assert np.abs(s.cost_z).max() <= 3.0
        assert np.abs(s.cov_price_z).max() <= 3.0
        assert np.abs(s.cov_mart_z).max() <= 3.0
        assert abs(s.price_z) <= 3.0
        assert s.v_terminal_max == 0.0
        assert s.terminal_gap_max <= 0.01
        # invalid configs are rejected up front
        with pytest.raises(uh.ConfigError):
            backtest(cfg.with_updates(n_paths=0))
