"""Hedging strategies, value and cost processes, and the backtest.

The partial-information strategy multiplies the particle cloud against the
solved value surface: with id_y the survival coordinate,

    theta*_t = [pi(id_y dg/ds) + rho/(sigma S) pi(a id_y dg/dx)] / pi(id_y),

evaluated one grid point before the price increment it multiplies, so the
position is a functional of the observable history only.  The book value is
the survival-weighted projection of the same surface; the cost process is
assembled pathwise as payments plus book value minus trading gains, and the
backtest checks the martingale / orthogonality / pricing properties that
characterize the locally risk-minimizing strategy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .filtering import init_cloud
from .models import LinearPayoff, ScenarioConfig, validate
from .pde import PdeSolution, interp_rows, solve_g, solve_gtilde, solve_phi
from .simulate import PathBundle, simulate_paths

__all__ = [
    "PaymentStream",
    "HedgeSeries",
    "BacktestSummary",
    "HedgeReport",
    "payment_stream",
    "theta_full",
    "hedge_paths",
    "eta_from",
    "closed_form_theta",
    "backtest",
]


# ---------------------------------------------------------------------------
# payment stream
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PaymentStream:
    """Cumulative payments N_t: the death benefit at death, the survival
    benefit credited at maturity.  Piecewise constant with at most one jump
    before T."""

    N: np.ndarray          # (n_paths, n_steps+1)
    terminal: np.ndarray   # N at T^tau: the contract claim per path

    @property
    def n_paths(self) -> int:
        return self.N.shape[0]


def payment_stream(bundle: PathBundle) -> PaymentStream:
    contract = bundle.config.contract
    died = np.isfinite(bundle.tau)
    kstar = bundle.death_step()
    n = bundle.n_steps

    death_benefit = np.zeros(bundle.n_paths)
    if np.any(died):
        s_at_death = bundle.S[np.arange(bundle.n_paths), kstar]
        death_benefit[died] = contract.U(bundle.tau[died], s_at_death[died])

    N = death_benefit[:, None] * bundle.H
    survival_benefit = np.where(~died, contract.G(bundle.S[:, -1]), 0.0)
    N[:, n] += survival_benefit
    return PaymentStream(N=N, terminal=N[:, n].copy())


# ---------------------------------------------------------------------------
# strategies
# ---------------------------------------------------------------------------

def theta_full(bundle: PathBundle, g_sol: PdeSolution) -> np.ndarray:
    """Full-information strategy dg/ds + (rho a / (S sigma)) dg/dx on the path.

    Interval-left values, zero after death.
    """
    c = bundle.config.coefficients
    n = bundle.n_steps
    theta = np.zeros((bundle.n_paths, n))
    alive = bundle.alive_mask()
    for k in range(n):
        s_k, x_k = bundle.S[:, k], bundle.X[:, k]
        th = g_sol.value_ds(k, s=s_k, x=x_k)
        if c.rho != 0.0:
            t = bundle.t_grid[k]
            th = th + c.rho * c.a(t, x_k) / (s_k * c.sigma(t, s_k)) \
                * g_sol.value_dx(k, s=s_k, x=x_k)
        theta[:, k] = th
    return theta * alive


@dataclass
class HedgeSeries:
    """Per-path series produced by one hedging run (rows = paths).

    ``theta_*`` are interval-left positions (n_paths, n_steps), already zero
    after death; ``V`` is the book value with V = 0 at and after settlement;
    ``pfs_mu`` is the projected drift used by the innovation/orthogonality
    diagnostics; ``terminal_gap`` is the distance between the pre-settlement
    book value and the claim actually paid at maturity (survivors only).
    """

    t_grid: np.ndarray
    theta_star: np.ndarray
    theta_full: np.ndarray
    V: np.ndarray
    V_full: np.ndarray
    pfs_mu: np.ndarray
    pi_y: np.ndarray
    N: np.ndarray
    terminal_gap: np.ndarray


def hedge_paths(config: ScenarioConfig, bundle: PathBundle, g_sol: PdeSolution,
                n_particles: int | None = None) -> HedgeSeries:
    """Run the filter-based hedge along every world of a bundle.

    The cloud sees only the observed price paths; positions and book values
    at index k use the cloud state at k (information up to t_k) and apply to
    the increment over [t_k, t_{k+1}).
    """
    c = config.coefficients
    n = config.n_steps
    n_paths = bundle.n_paths
    cloud = init_cloud(config, bundle.S, bundle.path_indices, n_particles)
    x_grid = g_sol.x_grid
    rho = c.rho

    theta_star = np.zeros((n_paths, n))
    ratio = np.empty((n_paths, n + 1))
    pfs_mu = np.empty((n_paths, n))
    pi_y = np.empty((n_paths, n + 1))

    for k in range(n + 1):
        s_k = bundle.S[:, k]
        Y = cloud.Y
        piY = Y.mean(axis=1)
        cloud._check_floor(piY)
        pi_y[:, k] = piY

        rows_g = g_sol.slice_at_s("value", k, s_k)
        g_p = interp_rows(rows_g, x_grid, cloud.X)
        ratio[:, k] = (Y * g_p).mean(axis=1) / piY

        if k < n:
            rows_gs = g_sol.slice_at_s("d_s", k, s_k)
            gs_p = interp_rows(rows_gs, x_grid, cloud.X)
            num = (Y * gs_p).mean(axis=1)
            if rho != 0.0:
                t = bundle.t_grid[k]
                rows_gx = g_sol.slice_at_s("d_x", k, s_k)
                gx_p = interp_rows(rows_gx, x_grid, cloud.X)
                a_p = c.a(t, cloud.X)
                sig = c.sigma(t, s_k)
                num = num + rho / (sig * s_k) * (a_p * Y * gx_p).mean(axis=1)
            theta_star[:, k] = num / piY
            pfs_mu[:, k], _ = cloud.projected_drift()
            cloud.step()

    alive = bundle.alive_mask()
    theta_star *= alive
    th_full = theta_full(bundle, g_sol)

    V = (1.0 - bundle.H) * ratio
    V[:, n] = 0.0
    V_full = np.empty_like(V)
    for k in range(n + 1):
        V_full[:, k] = g_sol.value(k, s=bundle.S[:, k], x=bundle.X[:, k])
    V_full *= (1.0 - bundle.H)
    V_full[:, n] = 0.0

    survived = ~np.isfinite(bundle.tau)
    gap = np.zeros(n_paths)
    gap[survived] = np.abs(ratio[survived, n]
                           - config.contract.G(bundle.S[survived, -1]))
    stream = payment_stream(bundle)
    return HedgeSeries(t_grid=bundle.t_grid, theta_star=theta_star,
                       theta_full=th_full, V=V, V_full=V_full, pfs_mu=pfs_mu,
                       pi_y=pi_y, N=stream.N, terminal_gap=gap)


def eta_from(V: np.ndarray, theta: np.ndarray, S_stopped: np.ndarray) -> np.ndarray:
    """Riskless-account leg eta = V - theta S^tau (theta treated as 0 at T)."""
    eta = V.copy()
    eta[:, :-1] -= theta * S_stopped[:, :-1]
    return eta


def trading_gains(theta: np.ndarray, S_stopped: np.ndarray) -> np.ndarray:
    gains = np.zeros_like(S_stopped)
    np.cumsum(theta * np.diff(S_stopped, axis=1), axis=1, out=gains[:, 1:])
    return gains


def cost_process(N: np.ndarray, V: np.ndarray, theta: np.ndarray,
                 S_stopped: np.ndarray) -> np.ndarray:
    """C = N + V - int theta dS^tau, pathwise on the grid."""
    return N + V - trading_gains(theta, S_stopped)


# ---------------------------------------------------------------------------
# uncorrelated closed form
# ---------------------------------------------------------------------------

def _assert_uncorrelated_homogeneous(config: ScenarioConfig) -> None:
    c = config.coefficients
    if c.rho != 0.0:
        raise ConfigError("closed-form pipeline requires rho = 0")
    recovery = config.contract.death_recovery
    if not (isinstance(recovery, LinearPayoff)
            or float(np.max(np.abs(recovery(0.0, np.linspace(0.0, 2.0, 5))))) == 0.0):
        raise ConfigError("closed-form pipeline needs a linear (or zero) death benefit")


def closed_form_theta(config: ScenarioConfig, bundle: PathBundle,
                      gtilde: PdeSolution | None = None,
                      phi: PdeSolution | None = None):
    """Uncorrelated-case strategy from the two 1D solves.

    theta*_t = [(dgtilde/ds - delta) m(T) + delta m(t)] / m(t) with m(t) the
    unconditional survival mass E[Y_t].  Time-homogeneous coefficients let
    m(t) be read off the survival transform as Phi(T - t, x0).
    """
    _assert_uncorrelated_homogeneous(config)
    if gtilde is None:
        gtilde = solve_gtilde(config)
    if phi is None:
        phi = solve_phi(config)
    recovery = config.contract.death_recovery
    delta = recovery.slope if isinstance(recovery, LinearPayoff) else 0.0
    n = config.n_steps
    x0q = np.array([config.x0])
    m = np.array([float(phi.value(n - k, x=x0q)[0]) for k in range(n + 1)])
    m_T = m[n]

    theta = np.zeros((bundle.n_paths, n))
    for k in range(n):
        gs = gtilde.value_ds(k, s=bundle.S[:, k])
        theta[:, k] = ((gs - delta) * m_T + delta * m[k]) / m[k]
    return theta * bundle.alive_mask(), gtilde, phi


# ---------------------------------------------------------------------------
# backtest
# ---------------------------------------------------------------------------

@dataclass
class BacktestSummary:
    """Cross-path statistics for the optimality diagnostics."""

    checkpoint_times: np.ndarray
    cost_mean: np.ndarray
    cost_se: np.ndarray
    cov_price: np.ndarray
    cov_price_se: np.ndarray
    cov_mart: np.ndarray
    cov_mart_se: np.ndarray
    price_lhs: float
    price_lhs_se: float
    price_rhs: float
    price_rhs_se: float
    zeta0_pde: float
    cost_var_partial: float
    cost_var_full: float
    terminal_gap_max: float
    v_terminal_max: float
    n_paths: int
    n_particles: int

    @property
    def cost_z(self) -> np.ndarray:
        return self.cost_mean / self.cost_se

    @property
    def cov_price_z(self) -> np.ndarray:
        return self.cov_price / self.cov_price_se

    @property
    def cov_mart_z(self) -> np.ndarray:
        return self.cov_mart / self.cov_mart_se

    @property
    def price_z(self) -> float:
        return (self.price_lhs - self.price_rhs) / \
            np.hypot(self.price_lhs_se, self.price_rhs_se)


@dataclass
class HedgeReport:
    """Everything one backtest produces: per-path series plus the summary."""

    config: ScenarioConfig
    series: HedgeSeries
    C: np.ndarray
    C_full: np.ndarray
    S_stopped: np.ndarray
    summary: BacktestSummary
    terminal_residuals: np.ndarray = field(default=None)


def _block_edges(n_steps: int, n_blocks: int = 8) -> np.ndarray:
    return np.unique(np.linspace(0, n_steps, n_blocks + 1).astype(int))


def _cov_with_se(u: np.ndarray, v: np.ndarray):
    u = u - u.mean(axis=0, keepdims=True)
    v = v - v.mean(axis=0, keepdims=True)
    prod = u * v
    n = u.shape[0]
    return prod.mean(axis=0), prod.std(axis=0, ddof=1) / np.sqrt(n)


def backtest(config: ScenarioConfig, n_particles: int | None = None,
             chunk_size: int = 4000, workers: int = 1) -> HedgeReport:
    """Simulate physical-measure worlds, hedge each one, test optimality.

    Checks, across paths: (1) cost increments have zero mean at the block
    checkpoints, (2) cost increments are uncorrelated with the stopped price
    and with its martingale part, (3) the physical-measure price of the
    hedged claim matches the martingale-measure value, (4) full-information
    cost variance, reported next to the partial-information one.
    """
    report = validate(config)
    if not report.ok:
        raise ConfigError(str(report))
    g_sol = solve_g(config)
    n, n_paths = config.n_steps, config.n_paths

    parts = []
    for lo in range(0, n_paths, chunk_size):
        idx = np.arange(lo, min(lo + chunk_size, n_paths))
        bundle = simulate_paths(config, "P", path_indices=idx, workers=workers)
        parts.append((bundle, hedge_paths(config, bundle, g_sol, n_particles)))

    def cat(sel, axis=0):
        return np.concatenate([sel(b, h) for b, h in parts], axis=axis)

    S_stopped = cat(lambda b, h: b.stopped().S)
    N = cat(lambda b, h: h.N)
    V = cat(lambda b, h: h.V)
    V_full = cat(lambda b, h: h.V_full)
    theta_star = cat(lambda b, h: h.theta_star)
    th_full = cat(lambda b, h: h.theta_full)
    pfs_mu = cat(lambda b, h: h.pfs_mu)
    pi_y = cat(lambda b, h: h.pi_y)
    terminal_gap = cat(lambda b, h: h.terminal_gap)
    alive = cat(lambda b, h: b.alive_mask())
    t_grid = parts[0][0].t_grid

    C = cost_process(N, V, theta_star, S_stopped)
    C_full = cost_process(N, V_full, th_full, S_stopped)

    # martingale part of the stopped price under the observable flow
    s_left = S_stopped[:, :-1]
    dM = np.diff(S_stopped, axis=1) - s_left * pfs_mu * config.dt * alive

    edges = _block_edges(n)
    dC = C[:, edges[1:]] - C[:, edges[:-1]]
    dS = S_stopped[:, edges[1:]] - S_stopped[:, edges[:-1]]
    dMb = np.add.reduceat(dM, edges[:-1], axis=1)

    cost_mean = dC.mean(axis=0)
    cost_se = dC.std(axis=0, ddof=1) / np.sqrt(n_paths)
    cov_p, cov_p_se = _cov_with_se(dC, dS)
    cov_m, cov_m_se = _cov_with_se(dC, dMb)

    gains_T = trading_gains(theta_star, S_stopped)[:, -1]
    lhs = N[:, -1] - gains_T
    price_lhs = float(lhs.mean())
    price_lhs_se = float(lhs.std(ddof=1) / np.sqrt(n_paths))

    bundle_hat = simulate_paths(config, "P_hat")
    claim_hat = payment_stream(bundle_hat).terminal
    price_rhs = float(claim_hat.mean())
    price_rhs_se = float(claim_hat.std(ddof=1) / np.sqrt(claim_hat.size))

    zeta0 = float(g_sol.value(0, s=np.array([config.s0]), x=np.array([config.x0]))[0])
    summary = BacktestSummary(
        checkpoint_times=t_grid[edges[1:]],
        cost_mean=cost_mean, cost_se=cost_se,
        cov_price=cov_p, cov_price_se=cov_p_se,
        cov_mart=cov_m, cov_mart_se=cov_m_se,
        price_lhs=price_lhs, price_lhs_se=price_lhs_se,
        price_rhs=price_rhs, price_rhs_se=price_rhs_se,
        zeta0_pde=zeta0,
        cost_var_partial=float((C[:, -1] - C[:, 0]).var(ddof=1)),
        cost_var_full=float((C_full[:, -1] - C_full[:, 0]).var(ddof=1)),
        terminal_gap_max=float(terminal_gap.max()) if terminal_gap.size else 0.0,
        v_terminal_max=float(np.abs(V[np.arange(n_paths),
                                      cat(lambda b, h: b.death_step())]).max()),
        n_paths=n_paths,
        n_particles=n_particles or config.n_particles,
    )
    series = HedgeSeries(t_grid=t_grid, theta_star=theta_star, theta_full=th_full,
                         V=V, V_full=V_full, pfs_mu=pfs_mu, pi_y=pi_y, N=N,
                         terminal_gap=terminal_gap)
    return HedgeReport(config=config, series=series, C=C, C_full=C_full,
                       S_stopped=S_stopped, summary=summary,
                       terminal_residuals=lhs - zeta0)
