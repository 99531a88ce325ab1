"""Backward Cauchy problems for the hedge value functions.

Three problems are solved on tensor-product grids:

* ``solve_g``      -- 2D in (s, x): price diffusion, factor diffusion with the
  martingale-measure drift, mixed derivative, killing at the mortality rate
  and the death-benefit source.
* ``solve_gtilde`` -- 1D in s: the driftless price diffusion alone (the
  Black-Scholes-type survival-benefit price used in the uncorrelated case).
* ``solve_phi``    -- 1D in x: factor diffusion killed at the mortality rate
  with terminal value 1 (the pure survival transform).

Numerics: Crank-Nicolson in time with a Rannacher start (two implicit-Euler
steps split in half) to damp the payoff kink, killing and source integrated
exactly over each step (g <- U + (g - U) exp(-gamma dt)) so spatially constant
and affine solutions stay exact, and the mixed derivative lagged one level.
When a payoff carries a strike the s-grid is sinh-stretched around it (cells
near the kink are ~alpha/n wide) and the terminal condition is seeded with its
cell averages; the stored terminal slice remains the pointwise payoff.
Boundary rows impose a vanishing second derivative by dropping the diffusion
term; first-order terms there use one-sided differences into the domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded
from scipy.sparse.linalg import splu

from . import rng
from .errors import DomainExcursionError, NumericalError
from .models import CallPayoff, PutPayoff, ScenarioConfig
from .simulate import advance_market

__all__ = ["PdeSolution", "solve_g", "solve_gtilde", "solve_phi",
           "feynman_kac_check", "ProbeResult", "interp_rows", "stretched_s_grid"]

_EDGE_TOL = 1e-9
_STRETCH_ALPHA = 0.4      # sinh cluster width as a fraction of the strike
_RANNACHER_STEPS = 2


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

def _strike_of(payoff) -> float | None:
    if isinstance(payoff, (CallPayoff, PutPayoff)):
        return payoff.strike
    return None


def stretched_s_grid(n_s: int, s_max: float, strike: float | None) -> np.ndarray:
    """Price grid on [0, s_max]; sinh-concentrated around a strike if given."""
    if strike is None or not 0.0 < strike < s_max:
        return np.linspace(0.0, s_max, n_s + 1)
    alpha = _STRETCH_ALPHA * strike
    lo = np.arcsinh(-strike / alpha)
    hi = np.arcsinh((s_max - strike) / alpha)
    s = strike + alpha * np.sinh(np.linspace(lo, hi, n_s + 1))
    s[0], s[-1] = 0.0, s_max
    return s


def _cell_average(payoff, t: float, grid: np.ndarray) -> np.ndarray:
    """Finite-volume projection of a payoff onto the grid cells.

    Exact for the piecewise-linear payoff families; equals the pointwise
    value away from a kink, so smooth payoffs are unchanged.
    """
    strike = _strike_of(payoff)
    if strike is None:
        return payoff(t, grid)
    mid = 0.5 * (grid[:-1] + grid[1:])
    lo = np.concatenate([[grid[0]], mid])
    hi = np.concatenate([mid, [grid[-1]]])
    if isinstance(payoff, CallPayoff):
        a = np.maximum(lo, strike)
        num = np.where(hi > strike, (hi - strike) ** 2 - np.maximum(a - strike, 0.0) ** 2, 0.0)
    else:
        b = np.minimum(hi, strike)
        num = np.where(lo < strike, (strike - lo) ** 2 - np.maximum(strike - b, 0.0) ** 2, 0.0)
    return num / (2.0 * (hi - lo))


def _second_diff_weights(grid: np.ndarray):
    """Three-point second-derivative weights on a possibly nonuniform grid.

    Exact on linear functions for any spacing (the affine-contract tests rely
    on this).  Boundary rows are zeroed by the callers.
    """
    n = len(grid)
    hminus = np.empty(n)
    hplus = np.empty(n)
    h = np.diff(grid)
    hminus[1:] = h
    hminus[0] = h[0]
    hplus[:-1] = h
    hplus[-1] = h[-1]
    wl = 2.0 / (hminus * (hminus + hplus))
    wc = -2.0 / (hminus * hplus)
    wr = 2.0 / (hplus * (hminus + hplus))
    return wl, wc, wr


# ---------------------------------------------------------------------------
# solution container with interpolating accessors
# ---------------------------------------------------------------------------

@dataclass
class PdeSolution:
    """Grid solution of one backward problem with derivative accessors.

    ``values`` has the time axis first: (n_t+1, n_s+1, n_x+1) for the 2D
    problem, (n_t+1, n+1) for the 1D ones.  Spatial derivatives are centered
    differences in the interior and one-sided at the edges, interpolated
    (bi)linearly like the values themselves.
    """

    kind: str                 # "sx", "s" or "x"
    t_grid: np.ndarray
    values: np.ndarray
    s_grid: np.ndarray | None = None
    x_grid: np.ndarray | None = None
    max_principle_gap: float = 0.0
    _d_s: np.ndarray | None = field(default=None, repr=False)
    _d_x: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise NumericalError("PDE solution contains non-finite values")

    @property
    def d_s(self) -> np.ndarray:
        if self._d_s is None:
            if self.s_grid is None:
                raise ValueError("solution has no s axis")
            self._d_s = np.gradient(self.values, self.s_grid, axis=1)
        return self._d_s

    @property
    def d_x(self) -> np.ndarray:
        if self._d_x is None:
            if self.x_grid is None:
                raise ValueError("solution has no x axis")
            axis = 1 if self.kind == "x" else 2
            self._d_x = np.gradient(self.values, self.x_grid, axis=axis)
        return self._d_x

    def time_index(self, t: float) -> int:
        dt = self.t_grid[1] - self.t_grid[0]
        k = int(round(t / dt))
        if not 0 <= k <= len(self.t_grid) - 1 or abs(self.t_grid[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"time {t} is not on the solution grid")
        return k

    def _interp(self, array: np.ndarray, k: int, s=None, x=None):
        if self.kind == "sx":
            if s is None or x is None:
                raise ValueError("2D solution needs both s and x")
            si, sw = _locate(self.s_grid, np.asarray(s, dtype=float), "s")
            xi, xw = _locate(self.x_grid, np.asarray(x, dtype=float), "x")
            a = array[k]
            return ((1 - sw) * ((1 - xw) * a[si, xi] + xw * a[si, xi + 1])
                    + sw * ((1 - xw) * a[si + 1, xi] + xw * a[si + 1, xi + 1]))
        grid = self.s_grid if self.kind == "s" else self.x_grid
        q = s if self.kind == "s" else x
        if q is None:
            raise ValueError(f"1D solution needs the {self.kind} coordinate")
        qi, qw = _locate(grid, np.asarray(q, dtype=float), self.kind)
        a = array[k]
        return (1 - qw) * a[qi] + qw * a[qi + 1]

    def value(self, k: int, s=None, x=None):
        return self._interp(self.values, k, s, x)

    def value_ds(self, k: int, s=None, x=None):
        return self._interp(self.d_s, k, s, x)

    def value_dx(self, k: int, s=None, x=None):
        return self._interp(self.d_x, k, s, x)

    def slice_at_s(self, array_name: str, k: int, s_vals) -> np.ndarray:
        """Interpolate a field along s only, returning rows over the x grid.

        Used by the hedging loop: one row per world (its observed price),
        then cheap per-particle interpolation in x via ``interp_rows``.
        """
        array = {"value": self.values, "d_s": self.d_s, "d_x": self.d_x}[array_name]
        si, sw = _locate(self.s_grid, np.asarray(s_vals, dtype=float), "s")
        a = array[k]
        return (1 - sw)[:, None] * a[si, :] + sw[:, None] * a[si + 1, :]

    def to_csv_rows(self, k: int):
        """Header and rows for CSV export of the time-k slice."""
        if self.kind == "sx":
            header = "s\\x," + ",".join(f"{x:.10g}" for x in self.x_grid)
            rows = [f"{self.s_grid[i]:.10g}," +
                    ",".join(f"{v:.12g}" for v in self.values[k, i])
                    for i in range(len(self.s_grid))]
        else:
            grid = self.s_grid if self.kind == "s" else self.x_grid
            header = f"{self.kind},value"
            rows = [f"{grid[i]:.10g},{self.values[k, i]:.12g}" for i in range(len(grid))]
        return header, rows


def _locate(grid: np.ndarray, q: np.ndarray, label: str):
    span = len(grid) - 1
    bad = (q < grid[0] - _EDGE_TOL * (1 + abs(grid[0]))) | \
          (q > grid[-1] + _EDGE_TOL * (1 + abs(grid[-1])))
    if np.any(bad):
        qb = np.asarray(q)[bad]
        raise DomainExcursionError(
            f"{label}-coordinate outside PDE domain [{grid[0]:.6g}, {grid[-1]:.6g}]:"
            f" e.g. {float(np.ravel(qb)[0]):.6g}"
        )
    idx = np.clip(np.searchsorted(grid, q, side="right") - 1, 0, span - 1)
    w = (q - grid[idx]) / (grid[idx + 1] - grid[idx])
    return idx, np.clip(w, 0.0, 1.0)


def interp_rows(rows: np.ndarray, grid: np.ndarray, q: np.ndarray, label: str = "x"):
    """Per-row linear interpolation on a UNIFORM grid: rows[r] sampled at q[r].

    The hot path of the hedging loop (per-particle factor lookups); index
    arithmetic instead of searchsorted.
    """
    h = grid[1] - grid[0]
    u = (np.asarray(q, dtype=float) - grid[0]) / h
    span = len(grid) - 1
    if np.any((u < -_EDGE_TOL) | (u > span + _EDGE_TOL)):
        bad = np.asarray(q)[(u < -_EDGE_TOL) | (u > span + _EDGE_TOL)]
        raise DomainExcursionError(
            f"{label}-coordinate outside PDE domain [{grid[0]:.6g}, {grid[-1]:.6g}]:"
            f" e.g. {float(np.ravel(bad)[0]):.6g}"
        )
    u = np.clip(u, 0.0, span)
    idx = np.minimum(u.astype(int), span - 1)
    w = u - idx
    lo = np.take_along_axis(rows, idx, axis=-1)
    hi = np.take_along_axis(rows, idx + 1, axis=-1)
    return (1 - w) * lo + w * hi


# ---------------------------------------------------------------------------
# operator assembly
# ---------------------------------------------------------------------------

def _coeff_arrays_2d(config: ScenarioConfig, t: float, SS, XX):
    c = config.coefficients
    sig = c.sigma(t, SS)
    aa = c.a(t, XX)
    drift = c.b(t, XX) - c.rho * aa * c.market_price_of_risk(t, SS, XX, check=False)
    gam = c.gamma_fn(t, XX)
    return sig, aa, drift, gam


def _assemble_2d(config: ScenarioConfig, t: float, s_grid, x_grid) -> sp.csc_matrix:
    """Spatial operator (diffusions + upwinded x-drift), no reaction, no mixed."""
    n1, n2 = len(s_grid), len(x_grid)
    hx = x_grid[1] - x_grid[0]
    SS, XX = np.meshgrid(s_grid, x_grid, indexing="ij")
    sig, aa, drift, _ = _coeff_arrays_2d(config, t, SS, XX)

    wl, wc, wr = _second_diff_weights(s_grid)
    half_s = 0.5 * sig**2 * SS**2
    sl = half_s * wl[:, None]
    sc = half_s * wc[:, None]
    sr = half_s * wr[:, None]
    for arr in (sl, sc, sr):
        arr[0, :] = 0.0
        arr[-1, :] = 0.0

    dxc = np.broadcast_to(0.5 * aa**2 / hx**2, (n1, n2)).copy()
    dxc[:, 0] = 0.0
    dxc[:, -1] = 0.0

    drift = np.broadcast_to(drift, (n1, n2))
    dp = np.maximum(drift, 0.0) / hx
    dm = np.maximum(-drift, 0.0) / hx
    dp = dp.copy()
    dm = dm.copy()
    # one-sided difference into the domain at the x edges
    dp[:, 0] = drift[:, 0] / hx
    dm[:, 0] = 0.0
    dm[:, -1] = -drift[:, -1] / hx
    dp[:, -1] = 0.0

    P = np.arange(n1)[:, None] * n2 + np.arange(n2)[None, :]
    rows, cols, vals = [], [], []

    def add(mask, shift, coef):
        rows.append(P[mask])
        cols.append(P[mask] + shift)
        vals.append(coef[mask])

    full = np.ones((n1, n2), dtype=bool)
    has_sp = np.zeros_like(full); has_sp[:-1, :] = True
    has_sm = np.zeros_like(full); has_sm[1:, :] = True
    has_xp = np.zeros_like(full); has_xp[:, :-1] = True
    has_xm = np.zeros_like(full); has_xm[:, 1:] = True

    add(full, 0, sc - 2.0 * dxc - dp - dm)
    add(has_sp, n2, sr)
    add(has_sm, -n2, sl)
    add(has_xp, 1, dxc + dp)
    add(has_xm, -1, dxc + dm)

    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n1 * n2, n1 * n2),
    ).tocsc()


def _mixed_term(values, sig, aa, SS, rho, s_grid, x_grid):
    """rho a sigma s g_sx, centered, zero on the boundary ring."""
    if rho == 0.0:
        return np.zeros_like(values)
    hx = x_grid[1] - x_grid[0]
    ds = np.gradient(values, s_grid, axis=0)
    out = np.zeros_like(values)
    out[1:-1, 1:-1] = (rho * aa * sig * SS)[1:-1, 1:-1] * \
        (ds[1:-1, 2:] - ds[1:-1, :-2]) / (2.0 * hx)
    return out


def _is_static(config: ScenarioConfig, probes) -> bool:
    flat = [np.concatenate([np.ravel(np.asarray(p, dtype=float)) for p in probe])
            for probe in probes]
    return all(np.array_equal(flat[0], f) for f in flat[1:])


# ---------------------------------------------------------------------------
# solvers
# ---------------------------------------------------------------------------

def solve_g(config: ScenarioConfig, time_refine: int = 1) -> PdeSolution:
    """Solve the 2D value problem for the endowment contract.

    Returns g with g(T, s, x) = G(T, s); the interior equation balances the
    (s, x) generator under the martingale measure against killing at the
    mortality rate plus the death-benefit source U gamma.
    """
    grid = config.pde_grid
    contract = config.contract
    T = contract.maturity
    n_t = config.n_steps * time_refine
    dt = T / n_t
    s_grid = stretched_s_grid(grid.n_s, grid.s_max,
                              _strike_of(contract.survival_payoff))
    x_grid = np.linspace(grid.x_min, grid.x_max, grid.n_x + 1)
    SS, XX = np.meshgrid(s_grid, x_grid, indexing="ij")
    rho = config.coefficients.rho

    static = _is_static(
        config, [_coeff_arrays_2d(config, t, SS, XX) for t in (0.0, 0.5 * T, T)])

    values = np.empty((config.n_steps + 1, grid.n_s + 1, grid.n_x + 1))
    values[-1] = contract.G(s_grid)[:, None]
    work = np.broadcast_to(_cell_average(contract.survival_payoff, T, s_grid)[:, None],
                           SS.shape).copy()

    A = lu = None
    for step in range(n_t - 1, -1, -1):
        t_new = step * dt
        sig, aa, _, gam = _coeff_arrays_2d(config, t_new, SS, XX)
        if A is None or not static:
            A = _assemble_2d(config, t_new, s_grid, x_grid)
            try:
                lu = splu(sp.identity(A.shape[0], format="csc") - 0.5 * dt * A)
            except RuntimeError as exc:
                raise NumericalError(f"PDE linear solve failed: {exc}") from exc
        rhs = work + dt * _mixed_term(work, sig, aa, SS, rho, s_grid, x_grid)
        if step >= n_t - _RANNACHER_STEPS:
            # Rannacher start: two implicit half-steps reuse the CN factor
            half = lu.solve(rhs.ravel())
            work = lu.solve(half).reshape(work.shape)
        else:
            rhs = rhs.ravel() + 0.5 * dt * A.dot(work.ravel())
            work = lu.solve(rhs).reshape(work.shape)
        U = contract.U(t_new, SS)
        work = U + (work - U) * np.exp(-gam * dt)
        if step % time_refine == 0:
            values[step // time_refine] = work

    sol = PdeSolution(kind="sx", t_grid=np.linspace(0.0, T, config.n_steps + 1),
                      values=values, s_grid=s_grid, x_grid=x_grid)
    sol.max_principle_gap = _max_principle_gap(config, values, s_grid)
    return sol


def _max_principle_gap(config: ScenarioConfig, values, s_grid) -> float:
    """Overshoot beyond [0, max(sup G, sup U)]; meaningful for bounded payoffs."""
    contract = config.contract
    bound = max(float(np.max(contract.G(s_grid))),
                float(np.max(contract.U(0.0, s_grid))))
    return max(0.0, -float(values.min())) + max(0.0, float(values.max()) - bound)


def _solve_1d(config: ScenarioConfig, grid, terminal_payoff, terminal_seed,
              diff_coef_fn, drift_fn, gamma_fn, source_fn, time_refine: int):
    """Shared backward march for the 1D problems (same scheme as solve_g)."""
    T = config.contract.maturity
    n_t = config.n_steps * time_refine
    dt = T / n_t
    n = len(grid)
    wl, wc, wr = _second_diff_weights(grid)
    h_edge = np.diff(grid)

    values = np.empty((config.n_steps + 1, n))
    values[-1] = terminal_payoff
    work = terminal_seed.astype(float).copy()

    probes = []
    for t in (0.0, 0.5 * T, T):
        probes.append((diff_coef_fn(t), drift_fn(t), gamma_fn(t), source_fn(t)))
    static = _is_static(config, probes)

    banded = cl = cc = cr = None
    for step in range(n_t - 1, -1, -1):
        t_new = step * dt
        if banded is None or not static:
            dco = diff_coef_fn(t_new)
            cl, cc, cr = dco * wl, dco * wc, dco * wr
            for arr in (cl, cc, cr):
                arr[0] = arr[-1] = 0.0
            drift = np.asarray(drift_fn(t_new), dtype=float)
            dp = np.maximum(drift, 0.0) / np.append(h_edge, h_edge[-1])
            dm = np.maximum(-drift, 0.0) / np.append(h_edge[0], h_edge)
            dp[0], dm[0] = drift[0] / h_edge[0], 0.0
            dm[-1], dp[-1] = -drift[-1] / h_edge[-1], 0.0
            cl = cl + dm
            cc = cc - dp - dm
            cr = cr + dp
            banded = np.zeros((3, n))
            banded[0, 1:] = -0.5 * dt * cr[:-1]
            banded[1, :] = 1.0 - 0.5 * dt * cc
            banded[2, :-1] = -0.5 * dt * cl[1:]
        if step >= n_t - _RANNACHER_STEPS:
            work = solve_banded((1, 1), banded, work)
            work = solve_banded((1, 1), banded, work)
        else:
            rhs = work.copy()
            rhs[1:-1] += 0.5 * dt * (cl[1:-1] * work[:-2] + cc[1:-1] * work[1:-1]
                                     + cr[1:-1] * work[2:])
            rhs[0] += 0.5 * dt * (cc[0] * work[0] + cr[0] * work[1])
            rhs[-1] += 0.5 * dt * (cl[-1] * work[-2] + cc[-1] * work[-1])
            work = solve_banded((1, 1), banded, rhs)
        gam = gamma_fn(t_new)
        src = source_fn(t_new)
        work = src + (work - src) * np.exp(-gam * dt)
        if step % time_refine == 0:
            values[step // time_refine] = work
    return values


def solve_gtilde(config: ScenarioConfig, time_refine: int = 1) -> PdeSolution:
    """Solve the 1D survival-benefit price: dg/dt + s^2 sigma^2 g_ss / 2 = 0."""
    grid = config.pde_grid
    c = config.coefficients
    payoff = config.contract.survival_payoff
    s_grid = stretched_s_grid(grid.n_s, grid.s_max, _strike_of(payoff))
    zero = np.zeros_like(s_grid)
    T = config.contract.maturity
    values = _solve_1d(
        config, s_grid,
        terminal_payoff=payoff(T, s_grid),
        terminal_seed=_cell_average(payoff, T, s_grid),
        diff_coef_fn=lambda t: 0.5 * c.sigma(t, s_grid) ** 2 * s_grid**2,
        drift_fn=lambda t: zero,
        gamma_fn=lambda t: zero,
        source_fn=lambda t: zero,
        time_refine=time_refine,
    )
    return PdeSolution(kind="s", t_grid=config.t_grid(), values=values, s_grid=s_grid)


def solve_phi(config: ScenarioConfig, time_refine: int = 1) -> PdeSolution:
    """Solve the survival transform: dPhi/dt + b Phi_x + a^2 Phi_xx / 2 = gamma Phi.

    Phi(t, X_t) is the conditional expectation of exp(-int_t^T gamma) given
    the factor filtration; the factor keeps its physical drift (the solve is
    used in the uncorrelated setting where the measure change leaves the
    factor dynamics unchanged).
    """
    grid = config.pde_grid
    c = config.coefficients
    x_grid = np.linspace(grid.x_min, grid.x_max, grid.n_x + 1)
    ones = np.ones_like(x_grid)
    values = _solve_1d(
        config, x_grid,
        terminal_payoff=ones,
        terminal_seed=ones,
        diff_coef_fn=lambda t: 0.5 * np.broadcast_to(c.a(t, x_grid), x_grid.shape).astype(float),
        drift_fn=lambda t: np.broadcast_to(c.b(t, x_grid), x_grid.shape).astype(float),
        gamma_fn=lambda t: c.gamma_fn(t, x_grid),
        source_fn=lambda t: np.zeros_like(x_grid),
        time_refine=time_refine,
    )
    return PdeSolution(kind="x", t_grid=config.t_grid(), values=values, x_grid=x_grid)


# ---------------------------------------------------------------------------
# Feynman-Kac cross-check
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbeResult:
    t: float
    s: float
    x: float
    pde_value: float
    mc_value: float
    mc_se: float
    z: float


def feynman_kac_check(config: ScenarioConfig, solution: PdeSolution, probes,
                      n_mc: int = 20000) -> list[ProbeResult]:
    """Compare PDE values against the stochastic representation at probe points.

    Each probe (t, s, x) starts a martingale-measure Monte Carlo on the
    remaining grid and accumulates the survival-discounted terminal benefit
    plus the death-benefit stream; the report carries a z-score per probe.
    """
    contract = config.contract
    c = config.coefficients
    out = []
    for probe_id, (t0, s0, x0) in enumerate(probes):
        k0 = solution.time_index(t0)
        n_rem = config.n_steps - k0
        pde_val = float(solution.value(k0, s=np.array([s0]), x=np.array([x0]))[0])
        if n_rem == 0:
            mc, se = float(contract.G(np.array([s0]))[0]), 0.0
        else:
            gen = rng.stream(config.seed, rng.PROBE, probe_id)
            root_dt = np.sqrt(config.dt)
            dW = root_dt * gen.standard_normal((n_mc, n_rem))
            dB = root_dt * gen.standard_normal((n_mc, n_rem))
            S, X = advance_market(config, dW, dB, "P_hat",
                                  s_init=s0, x_init=x0, t_start=t0)
            t_rem = t0 + config.dt * np.arange(n_rem + 1)
            gam = c.gamma_fn(t_rem[None, :], X)
            disc = np.ones_like(S)
            np.cumprod(np.exp(-0.5 * (gam[:, 1:] + gam[:, :-1]) * config.dt),
                       axis=1, out=disc[:, 1:])
            payoff = disc[:, -1] * contract.G(S[:, -1])
            integrand = disc * contract.U(t_rem[None, :], S) * gam
            payoff = payoff + np.trapezoid(integrand, dx=config.dt, axis=1)
            mc = float(payoff.mean())
            se = float(payoff.std(ddof=1) / np.sqrt(n_mc))
        z = (mc - pde_val) / se if se > 0 else 0.0
        out.append(ProbeResult(t=t0, s=s0, x=x0, pde_value=pde_val,
                               mc_value=mc, mc_se=se, z=z))
    return out
