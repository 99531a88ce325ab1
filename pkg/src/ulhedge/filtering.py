"""Conditional-law machinery given the observed price path.

Because the observed price is driftless under the martingale measure and its
volatility never vanishes, the price filtration coincides with that of the
martingale-measure Brownian motion, whose increments can be read off the
price path.  The conditional law of the hidden factor (and of the survival
process it drives) given the price history is therefore sampled *exactly*:
particles are propagated with the observed price-Brownian increments plus
fresh independent orthogonal noise, with no importance weights and no
resampling.  Physical-measure projections (the projected drift feeding the
innovation process, the observable hazard rate) reuse the same particles with
per-particle inverse-density weights, and a Kushner-Stratonovich residual
diagnostic checks the filter against the generator equation it should solve.

Clouds are batched: axis 0 indexes worlds (observed paths), axis 1 particles.
Each world draws its orthogonal noise from its own counter-based stream, so a
batch of worlds filters identically to the same worlds run one at a time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import rng
from .errors import NumericalError, SurvivalFloorError
from .models import ScenarioConfig

__all__ = [
    "ParticleCloud",
    "ProjectionSeries",
    "SmoothFunctional",
    "init_cloud",
    "step_cloud",
    "project_mu",
    "hazard_rate_partial",
    "run_filter",
    "ks_residual",
    "functional_constant",
    "functional_coord_x",
    "functional_survival",
]


def _zero(t, s, x, y):
    return np.zeros(np.broadcast(s, x, y).shape)


@dataclass(frozen=True)
class SmoothFunctional:
    """A smooth f(t, s, x, y) with the partials the generator acts on."""

    name: str
    f: Callable
    f_t: Callable = _zero
    f_s: Callable = _zero
    f_x: Callable = _zero
    f_y: Callable = _zero
    f_ss: Callable = _zero
    f_sx: Callable = _zero
    f_xx: Callable = _zero


def functional_constant(level: float = 1.0) -> SmoothFunctional:
    return SmoothFunctional("const", lambda t, s, x, y: np.full(np.broadcast(s, x, y).shape, level))


def functional_coord_x() -> SmoothFunctional:
    return SmoothFunctional(
        "x",
        f=lambda t, s, x, y: np.broadcast_to(x, np.broadcast(s, x, y).shape).copy(),
        f_x=lambda t, s, x, y: np.ones(np.broadcast(s, x, y).shape),
    )


def functional_survival() -> SmoothFunctional:
    return SmoothFunctional(
        "id_y",
        f=lambda t, s, x, y: np.broadcast_to(y, np.broadcast(s, x, y).shape).copy(),
        f_y=lambda t, s, x, y: np.ones(np.broadcast(s, x, y).shape),
    )


class ParticleCloud:
    """Exact conditional sampler of (X, Y) given the observed price history.

    State arrays have shape (n_worlds, n_particles).  ``log_L`` accumulates
    the martingale-measure density kernel along (observed price, particle
    factor); its inverse exponential weights physical-measure projections.
    """

    def __init__(self, config: ScenarioConfig, s_paths: np.ndarray,
                 world_indices=None, n_particles: int | None = None):
        s_paths = np.atleast_2d(np.asarray(s_paths, dtype=float))
        if s_paths.shape[1] != config.n_steps + 1:
            raise ValueError("observed price path does not match the config grid")
        self.config = config
        self.s_paths = s_paths
        self.n_worlds = s_paths.shape[0]
        self.n_particles = n_particles or config.n_particles
        self.t_grid = config.t_grid()
        self.dt = config.dt

        c = config.coefficients
        t_left = self.t_grid[:-1][None, :]
        sig = c.sigma(t_left, s_paths[:, :-1])
        if np.any(sig <= 0):
            raise NumericalError("sigma vanishes on the observed path")
        self.dW_obs = np.diff(s_paths, axis=1) / (s_paths[:, :-1] * sig)

        if world_indices is None:
            world_indices = np.arange(self.n_worlds)
        self._streams = [rng.stream(config.seed, rng.FILTER, int(w))
                         for w in np.asarray(world_indices)]

        shape = (self.n_worlds, self.n_particles)
        self.X = np.full(shape, config.x0, dtype=float)
        self.Gamma_p = np.zeros(shape)
        self.log_L = np.zeros(shape)
        self.k = 0

    # -- state views ---------------------------------------------------------
    @property
    def t(self) -> float:
        return float(self.t_grid[self.k])

    @property
    def Y(self) -> np.ndarray:
        return np.exp(-self.Gamma_p)

    @property
    def s_now(self) -> np.ndarray:
        """Observed price per world at the current index, shaped (n_worlds, 1)."""
        return self.s_paths[:, self.k][:, None]

    def p_weights(self) -> np.ndarray:
        """Physical-measure weights exp(-log L), normalized per world."""
        shifted = self.log_L.min(axis=1, keepdims=True) - self.log_L
        w = np.exp(shifted)
        return w / w.sum(axis=1, keepdims=True)

    # -- evolution -------------------------------------------------------------
    def step(self) -> None:
        """Advance every world one grid interval (Euler factor, exact density)."""
        if self.k >= self.config.n_steps:
            raise IndexError("cloud already at the terminal time")
        c = self.config.coefficients
        k = self.k
        t = self.t_grid[k]
        s_k = self.s_now
        sig = c.sigma(t, s_k)
        mu = c.mu(t, s_k, self.X)
        kernel = mu / sig
        bad = np.abs(kernel) > c.c_bound
        if np.any(bad):
            raise NumericalError(
                f"|mu/sigma| exceeded c_bound for {int(bad.sum())} particles at t={t:.4g}"
            )
        a = c.a(t, self.X)
        b = c.b(t, self.X)
        rho = c.rho
        dw = self.dW_obs[:, k][:, None]

        dB = np.empty((self.n_worlds, self.n_particles))
        for w, gen in enumerate(self._streams):
            dB[w] = gen.standard_normal(self.n_particles)
        dB *= np.sqrt(self.dt)

        gam_old = c.gamma_fn(t, self.X)
        x_new = self.X + (b - a * rho * kernel) * self.dt \
            + a * (rho * dw + np.sqrt(1.0 - rho**2) * dB)
        gam_new = c.gamma_fn(self.t_grid[k + 1], x_new)
        self.Gamma_p = self.Gamma_p + 0.5 * (gam_old + gam_new) * self.dt
        self.log_L = self.log_L - kernel * dw + 0.5 * kernel**2 * self.dt
        self.X = x_new
        self.k = k + 1
        if not np.all(np.isfinite(self.X)):
            raise NumericalError(f"non-finite particle state at t={self.t_grid[self.k]:.4g}")

    # -- conditional expectations ---------------------------------------------
    def pi(self, values: np.ndarray) -> np.ndarray:
        """Martingale-measure filter estimate: plain particle average."""
        return values.mean(axis=1)

    def pi_se(self, values: np.ndarray) -> np.ndarray:
        return values.std(axis=1, ddof=1) / np.sqrt(self.n_particles)

    def pi_functional(self, func: SmoothFunctional) -> np.ndarray:
        return self.pi(func.f(self.t, self.s_now, self.X, self.Y))

    def survival_ratio(self, values: np.ndarray) -> np.ndarray:
        """pi(values * Y) / pi(Y): conditional expectation given survival."""
        Y = self.Y
        denom = self.pi(Y)
        self._check_floor(denom)
        return self.pi(values * Y) / denom

    def _weighted_survival_ratio(self, values: np.ndarray):
        """Physical-measure projection ratio sum(w v Y) / sum(w Y) with SE."""
        w = self.p_weights()
        Y = self.Y
        denom = (w * Y).sum(axis=1)
        self._check_floor(denom)
        est = (w * values * Y).sum(axis=1) / denom
        resid = w * Y * (values - est[:, None])
        se = np.sqrt((resid**2).sum(axis=1)) / denom
        return est, se

    def _check_floor(self, denom: np.ndarray) -> None:
        if np.any(denom < self.config.survival_floor):
            raise SurvivalFloorError(
                f"survival mass exhausted at t={self.t:.4g}"
                f" (min mass {float(denom.min()):.3e})"
            )

    def projected_drift(self):
        """Estimate of the physical predictable projection of mu on survival."""
        c = self.config.coefficients
        mu = c.mu(self.t, self.s_now, self.X)
        return self._weighted_survival_ratio(mu)

    def hazard_rate(self):
        """Estimate of the observable martingale hazard rate."""
        c = self.config.coefficients
        gam = c.gamma_fn(self.t, self.X)
        return self._weighted_survival_ratio(gam)

    def generator_apply(self, func: SmoothFunctional) -> np.ndarray:
        """Per-particle generator of (S, X, Y) under the martingale measure."""
        c = self.config.coefficients
        t, s, x, y = self.t, self.s_now, self.X, self.Y
        sig = c.sigma(t, s)
        a = c.a(t, x)
        mu = c.mu(t, s, x)
        drift_x = c.b(t, x) - c.rho * a * mu / sig
        gam = c.gamma_fn(t, x)
        return (func.f_t(t, s, x, y)
                + drift_x * func.f_x(t, s, x, y)
                - y * gam * func.f_y(t, s, x, y)
                + 0.5 * a**2 * func.f_xx(t, s, x, y)
                + c.rho * a * sig * s * func.f_sx(t, s, x, y)
                + 0.5 * sig**2 * s**2 * func.f_ss(t, s, x, y))


# ---------------------------------------------------------------------------
# operation-level wrappers
# ---------------------------------------------------------------------------

def init_cloud(config: ScenarioConfig, s_path, world_indices=None,
               n_particles: int | None = None) -> ParticleCloud:
    """All particles start at (x0, survival 1, unit density)."""
    return ParticleCloud(config, s_path, world_indices, n_particles)


def step_cloud(cloud: ParticleCloud) -> ParticleCloud:
    cloud.step()
    return cloud


def project_mu(cloud: ParticleCloud):
    """Projected drift for the interval starting at the cloud's current time."""
    return cloud.projected_drift()


def hazard_rate_partial(cloud: ParticleCloud):
    return cloud.hazard_rate()


# ---------------------------------------------------------------------------
# series over the whole horizon
# ---------------------------------------------------------------------------

@dataclass
class ProjectionSeries:
    """Grid-indexed filter estimates with per-estimate standard errors.

    ``estimates[name]`` has shape (n_worlds, n_steps+1); drift and hazard
    projections are predictable, so their final column repeats the last
    computed value.
    """

    t_grid: np.ndarray
    estimates: dict = field(default_factory=dict)
    std_errors: dict = field(default_factory=dict)

    def names(self):
        return list(self.estimates)


def run_filter(config: ScenarioConfig, s_path, functionals=(),
               world_indices=None, n_particles: int | None = None) -> ProjectionSeries:
    """Run the cloud over the horizon collecting the standard projections.

    Always records pi(1), pi(id_y), the projected drift and the observable
    hazard rate; extra ``SmoothFunctional``s are recorded under their names.
    """
    cloud = init_cloud(config, s_path, world_indices, n_particles)
    n = config.n_steps
    shape = (cloud.n_worlds, n + 1)
    series = ProjectionSeries(t_grid=cloud.t_grid)
    names = ["pi_one", "pi_y", "proj_mu", "hazard"] + [f.name for f in functionals]
    for name in names:
        series.estimates[name] = np.empty(shape)
        series.std_errors[name] = np.zeros(shape)

    for k in range(n + 1):
        ones = np.ones((cloud.n_worlds, cloud.n_particles))
        series.estimates["pi_one"][:, k] = cloud.pi(ones)
        series.estimates["pi_y"][:, k] = cloud.pi(cloud.Y)
        series.std_errors["pi_y"][:, k] = cloud.pi_se(cloud.Y)
        mu_est, mu_se = cloud.projected_drift()
        series.estimates["proj_mu"][:, k] = mu_est
        series.std_errors["proj_mu"][:, k] = mu_se
        hz, hz_se = cloud.hazard_rate()
        series.estimates["hazard"][:, k] = hz
        series.std_errors["hazard"][:, k] = hz_se
        for func in functionals:
            vals = func.f(cloud.t, cloud.s_now, cloud.X, cloud.Y)
            series.estimates[func.name][:, k] = cloud.pi(vals)
            series.std_errors[func.name][:, k] = cloud.pi_se(vals)
        if k < n:
            cloud.step()
    return series


def ks_residual(config: ScenarioConfig, s_path, func: SmoothFunctional,
                world_indices=None, n_particles: int | None = None) -> np.ndarray:
    """Residual of the filter equation for f along the observed path(s).

    R_t = pi_t(f) - pi_0(f) - int pi(Lf) du - int [rho pi(a f_x)
    + S sigma pi(f_s)] dW_obs, evaluated with left-endpoint sums.  Shrinks at
    the usual O(sqrt(dt) + 1/sqrt(n_particles)) rate.
    """
    cloud = init_cloud(config, s_path, world_indices, n_particles)
    c = config.coefficients
    n = config.n_steps
    resid = np.zeros((cloud.n_worlds, n + 1))
    pi_f0 = cloud.pi_functional(func)
    drift_sum = np.zeros(cloud.n_worlds)
    gain_sum = np.zeros(cloud.n_worlds)
    for k in range(n):
        t, s, x, y = cloud.t, cloud.s_now, cloud.X, cloud.Y
        sig = c.sigma(t, s)
        a = c.a(t, x)
        pi_gen = cloud.pi(cloud.generator_apply(func))
        gain = c.rho * cloud.pi(a * func.f_x(t, s, x, y)) \
            + cloud.pi(sig * s * func.f_s(t, s, x, y))
        cloud.step()
        drift_sum += pi_gen * cloud.dt
        gain_sum += gain * cloud.dW_obs[:, k]
        resid[:, k + 1] = cloud.pi_functional(func) - pi_f0 - drift_sum - gain_sum
    return resid
