"""Distances between empirical distributions and MCMC efficiency diagnostics."""

import numpy as np

from ._backend import kernels
from .errors import ContractError

KL_FLOOR = 1e-12
KL_CAP = 1e6
MIN_CHAIN = 10


def _values(dist):
    values = getattr(dist, "values", dist)
    values = np.sort(np.asarray(values, dtype=float).ravel())
    if values.size == 0:
        raise ContractError("empty distribution")
    return values


def _ecdf(sorted_values, x):
    return np.searchsorted(sorted_values, x, side="right") / sorted_values.size


def ks_distance(f0, f1):
    """Largest vertical gap between two right-continuous ECDFs."""
    a, b = _values(f0), _values(f1)
    pooled = np.concatenate([a, b])
    return float(np.max(np.abs(_ecdf(a, pooled) - _ecdf(b, pooled))))


def cvm_distance(f0, f1):
    """Mean over the points of ``f0`` of the squared ECDF difference.

    ``f0`` is the reference, so the statistic is not symmetric.
    """
    a, b = _values(f0), _values(f1)
    return float(np.mean((_ecdf(a, a) - _ecdf(b, a)) ** 2))


def _projected_cdf(sorted_values, grid):
    x = np.unique(sorted_values)
    counts = np.searchsorted(sorted_values, x, side="right") / sorted_values.size
    return np.interp(grid, x, counts, left=0.0, right=1.0)


def kl_divergence(f0, f1, grid_size=1000):
    """``sum f0 log(f0/f1) dx`` with densities from ECDFs interpolated onto a grid over the range of f0.

    Densities are floored at ``KL_FLOOR`` and the result capped at ``KL_CAP``.
    A single-atom input has no density: equal atoms give 0, anything else
    the cap.
    """
    if grid_size < 16:
        raise ContractError("grid_size must be >= 16")
    a, b = _values(f0), _values(f1)
    if a[0] == a[-1] or b[0] == b[-1]:
        return 0.0 if a[0] == a[-1] == b[0] == b[-1] else KL_CAP
    # The integrand vanishes where f0 has no mass, so the grid spans the
    # range of f0 only. Spanning the pooled range would let one heavy f1
    # tail stretch the bins until both samples share a single bin.
    lo, hi = a[0], a[-1]
    grid = np.linspace(lo, hi, grid_size)
    dx = grid[1] - grid[0]
    # The leftmost edge carries any atom at the minimum of f0.
    edges = np.concatenate([[lo - dx], grid])
    p0 = np.maximum(np.diff(_projected_cdf(a, edges)) / dx, KL_FLOOR)
    p1 = np.maximum(np.diff(_projected_cdf(b, edges)) / dx, KL_FLOOR)
    value = float(np.sum(p0 * np.log(p0 / p1)) * dx)
    return min(value, KL_CAP)


def effective_sample_size(chain):
    """``m / (1 + 2 sum c_k)`` truncated by Geyer's initial positive sequence, clamped to (0, m].

    A constant chain returns ``m``.
    """
    x = np.asarray(chain, dtype=float).ravel()
    m = x.size
    if m < MIN_CHAIN:
        raise ContractError(f"chain length must be >= {MIN_CHAIN}")
    if not np.all(np.isfinite(x)):
        raise ContractError("chain contains non-finite values")
    tau = kernels.ips_tau(x)
    return float(min(m / tau, m))


def ess_per_hour(draws):
    """Effective draws per hour of computation.

    MCMC: the minimum ESS over coefficients and precisions, ignoring
    coordinates that never moved. Bootstrap: every usable replicate counts.
    """
    if not draws.elapsed_hours > 0:
        raise ContractError("elapsed_hours must be positive")
    if draws.source == "bootstrap":
        return draws.usable().size / draws.elapsed_hours
    mon = draws.monitored()
    moving = [j for j in range(mon.shape[1]) if np.ptp(mon[:, j]) > 0]
    if not moving:
        return len(draws) / draws.elapsed_hours
    return min(effective_sample_size(mon[:, j]) for j in moving) / draws.elapsed_hours
