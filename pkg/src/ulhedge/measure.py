"""Minimal martingale measure machinery.

The density of the minimal martingale measure is the stochastic exponential
of minus the market price of risk integrated against W.  Everything here is a
pure path-to-path transformation on a simulated bundle; expectations under
the new measure can be formed either by reweighting P paths with L or by
simulating driftless paths directly, and the tests cross-check the two.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .simulate import PathBundle

__all__ = ["DensityPath", "StructureCoefficients", "density_path",
           "girsanov_shift", "structure_coefficients"]


@dataclass(frozen=True)
class DensityPath:
    """Doleans-Dade exponential L of -(mu/sigma) . W along each path."""

    L: np.ndarray        # (n_paths, n_steps+1), positive, L_0 = 1
    log_L: np.ndarray
    kernel: np.ndarray   # mu/sigma at interval left endpoints, (n_paths, n_steps)


def _kernel(bundle: PathBundle) -> np.ndarray:
    c = bundle.config.coefficients
    t_left = bundle.t_grid[:-1][None, :]
    return c.market_price_of_risk(t_left, bundle.S[:, :-1], bundle.X[:, :-1])


def density_path(bundle: PathBundle) -> DensityPath:
    """Density process of the minimal martingale measure along the bundle.

    For a P bundle, d log L = -(mu/sigma) dW - (mu/sigma)^2/2 dt, and
    E_P[L_t] = 1.  For a P_hat bundle the same object is accumulated in its
    Girsanov-shifted form d log L = -(mu/sigma) dW_hat + (mu/sigma)^2/2 dt
    (bundle.W is then the P_hat Brownian), which is what per-particle weights
    in the filter use.
    """
    kernel = _kernel(bundle)
    dW = np.diff(bundle.W, axis=1)
    half = 0.5 * kernel**2 * bundle.dt
    if bundle.measure == "P":
        dlog = -kernel * dW - half
    else:
        dlog = -kernel * dW + half
    log_L = np.zeros_like(bundle.W)
    np.cumsum(dlog, axis=1, out=log_L[:, 1:])
    if not np.all(np.isfinite(log_L)):
        bad = np.where(~np.isfinite(log_L).all(axis=1))[0]
        raise NumericalError(f"non-finite density on path row(s) {bad[:5].tolist()}")
    return DensityPath(L=np.exp(log_L), log_L=log_L, kernel=kernel)


def girsanov_shift(bundle: PathBundle) -> np.ndarray:
    """W_hat = W + integral of mu/sigma dt along a P bundle."""
    if bundle.measure != "P":
        raise ValueError("girsanov_shift expects a bundle simulated under P")
    kernel = _kernel(bundle)
    W_hat = bundle.W.copy()
    W_hat[:, 1:] += np.cumsum(kernel * bundle.dt, axis=1)
    return W_hat


@dataclass(frozen=True)
class StructureCoefficients:
    """Structure-condition integrands and mean-variance tradeoff processes.

    ``alpha_full`` is mu/(S sigma^2) against the full-information martingale
    part of the stopped price; ``alpha_partial`` uses the projected drift.
    Both are interval-left values, zeroed after death.  K and K_tilde are the
    running integrals of alpha^2 against d<M> = S^2 sigma^2 dt; the
    market-price-of-risk bound caps both at c_bound^2 T.
    """

    alpha_full: np.ndarray      # (n_paths, n_steps)
    alpha_partial: np.ndarray | None
    K: np.ndarray               # (n_paths, n_steps+1)
    K_tilde: np.ndarray | None


def structure_coefficients(bundle: PathBundle,
                           pfs_mu: np.ndarray | None = None) -> StructureCoefficients:
    """Compute alpha paths and mean-variance tradeoffs, stopped at death.

    ``pfs_mu`` (projected drift at interval-left points, from the filter) is
    required for the partial-information quantities; omit it to get only the
    full-information ones.
    """
    c = bundle.config.coefficients
    t_left = bundle.t_grid[:-1][None, :]
    S_left = bundle.S[:, :-1]
    sig = c.sigma(t_left, S_left)
    alive = bundle.alive_mask()
    kernel = _kernel(bundle)

    alpha_full = kernel / (S_left * sig) * alive
    K = np.zeros_like(bundle.S)
    np.cumsum(kernel**2 * bundle.dt * alive, axis=1, out=K[:, 1:])

    alpha_partial = None
    K_tilde = None
    if pfs_mu is not None:
        if pfs_mu.shape != alpha_full.shape:
            raise ValueError("projected-drift array does not match the bundle grid")
        alpha_partial = pfs_mu / (S_left * sig**2) * alive
        K_tilde = np.zeros_like(bundle.S)
        np.cumsum((pfs_mu / sig) ** 2 * bundle.dt * alive, axis=1, out=K_tilde[:, 1:])
    return StructureCoefficients(alpha_full=alpha_full, alpha_partial=alpha_partial,
                                 K=K, K_tilde=K_tilde)
