"""Generalised Pareto mathematics in the (shape, adjusted scale) parameterisation.

Exceedances ``y >= 0`` of a zero threshold are modelled as GP with shape
``xi`` and scale ``sigma``. Inference works with ``nu = sigma * (1 + xi)``,
which makes the expected information diagonal in ``(xi, nu)``.

Per observation, with ``G = 1 + xi * (1 + xi) * y / nu``::

    l = -log(nu / (1 + xi)) - (1/xi + 1) * log(G)

and the ``xi -> 0`` limit ``-log(nu) - y / nu`` (evaluated by a Taylor
series for ``|xi| < XI_TOL`` so the two branches join smoothly).
"""

from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .basis import check_angles
from .errors import ContractError, DomainError

XI_TOL = 1e-6


@dataclass
class PeaksSample:
    """Exceedance sizes (threshold 0) paired with covariate angles in degrees."""

    sizes: np.ndarray
    angles: np.ndarray
    period: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.sizes = np.atleast_1d(np.asarray(self.sizes, dtype=float))
        self.angles = check_angles(self.angles)
        if self.sizes.shape != self.angles.shape:
            raise ContractError("sizes and angles must have equal length")
        if self.sizes.size and (not np.all(np.isfinite(self.sizes)) or self.sizes.min() < 0):
            raise DomainError("exceedance sizes must be finite and non-negative")
        if self.period <= 0:
            raise ContractError("period must be positive")

    def __len__(self):
        return self.sizes.size

    def subset(self, index):
        return PeaksSample(self.sizes[index], self.angles[index], self.period, dict(self.meta))


@dataclass
class PointwiseParams:
    """Per-observation shape ``xi`` and adjusted scale ``nu``."""

    xi: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        self.xi = np.atleast_1d(np.asarray(self.xi, dtype=float))
        self.nu = np.atleast_1d(np.asarray(self.nu, dtype=float))
        if self.xi.shape != self.nu.shape:
            raise ContractError("xi and nu must have equal length")

    @property
    def feasible(self):
        return bool(np.all(self.nu > 0) and np.all(1.0 + self.xi > 0))

    @property
    def sigma(self):
        return sigma_from_nu(self.xi, self.nu)


def sigma_from_nu(xi, nu):
    """GP scale ``nu / (1 + xi)``."""
    xi = np.asarray(xi, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if np.any(1.0 + xi <= 0) or np.any(nu <= 0):
        raise DomainError("sigma_from_nu requires 1 + xi > 0 and nu > 0")
    out = nu / (1.0 + xi)
    return float(out) if out.ndim == 0 else out


def nu_from_sigma(xi, sigma):
    return np.asarray(sigma, dtype=float) * (1.0 + np.asarray(xi, dtype=float))


def _check_lengths(sample, params):
    if len(sample) != params.xi.size:
        raise ContractError(f"sample has {len(sample)} observations but params have {params.xi.size}")


def log_likelihood(y, xi, nu):
    """Sum of per-observation log-densities; ``-inf`` outside the support."""
    return kernels.gpd_loglik(y, np.broadcast_to(xi, np.shape(y)),
                              np.broadcast_to(nu, np.shape(y)), XI_TOL)


def first_infeasible(y, xi, nu):
    """Index of the first observation with zero likelihood, or ``None``."""
    y = np.asarray(y, dtype=float)
    xi = np.broadcast_to(np.asarray(xi, dtype=float), y.shape)
    nu = np.broadcast_to(np.asarray(nu, dtype=float), y.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        bad = (nu <= 0) | (1.0 + xi <= 0) | (y < 0) | (1.0 + xi * (1.0 + xi) * y / nu <= 0)
    bad |= ~np.isfinite(xi) | ~np.isfinite(nu)
    idx = np.flatnonzero(bad)
    return int(idx[0]) if idx.size else None


def infeasibility_message(sample, params):
    i = first_infeasible(sample.sizes, params.xi, params.nu)
    if i is None:
        return "likelihood is not finite"
    return (f"observation {i} (angle={sample.angles[i]:g}, size={sample.sizes[i]:g}) lies outside the "
            f"support of GP(xi={params.xi[i]:g}, nu={params.nu[i]:g})")


def neg_log_likelihood(sample, params):
    """Negative log-likelihood of ``sample``; ``+inf`` if any point is infeasible.

    Out-of-support data is a rejection signal for optimisers and
    samplers, not an error.
    """
    _check_lengths(sample, params)
    return -log_likelihood(sample.sizes, params.xi, params.nu)


def score(y, xi, nu):
    """Per-observation ``(dl/dxi, dl/dnu)`` of the log-likelihood.

    The ``xi`` component is ``1/(1+xi) + [log G - (1+2 xi)(G-1)/G] / xi^2``
    and the ``nu`` component ``-(1/nu) * (1 - (1/xi + 1)(G-1)/G)``. The
    commonly printed forms with ``(1 - 2 xi)``, ``log(G)/xi`` and a
    positive ``nu`` component disagree with finite differences of the
    log-density; these are the corrected forms. At ``xi = 0`` the shape
    derivative is ``1 - 2a + a^2/2`` with ``a = y/nu``.
    """
    y = np.asarray(y, dtype=float)
    dxi, dnu, ok = kernels.gpd_score(y, np.broadcast_to(xi, y.shape),
                                     np.broadcast_to(nu, y.shape), XI_TOL)
    if not ok:
        raise DomainError("gradient undefined: observation outside the GP support or infeasible parameters")
    return dxi, dnu


def gradient(sample, params):
    _check_lengths(sample, params)
    return score(sample.sizes, params.xi, params.nu)


def expected_fisher(xi, nu):
    """Diagonal expected information ``(1/(1+xi)^2, 1/(nu^2 (1+2 xi)))``."""
    xi = np.asarray(xi, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if np.any(1.0 + 2.0 * xi <= 0):
        raise DomainError("expected information requires xi > -1/2")
    if np.any(nu <= 0):
        raise DomainError("expected information requires nu > 0")
    return 1.0 / (1.0 + xi) ** 2, 1.0 / (nu ** 2 * (1.0 + 2.0 * xi))


def cdf(y, xi, sigma):
    y = np.maximum(np.asarray(y, dtype=float), 0.0)
    xi = np.asarray(xi, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.maximum(1.0 + xi * y / sigma, 0.0)
        general = 1.0 - z ** (-1.0 / np.where(xi == 0, 1.0, xi))
    return np.where(np.abs(xi) < XI_TOL, -np.expm1(-y / sigma), general)


def quantile(xi, sigma, u):
    """Inverse CDF: ``(sigma/xi)((1-u)^(-xi) - 1)``, or ``-sigma log(1-u)`` at xi=0."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0) or np.any(u >= 1):
        raise DomainError("quantile level must lie in [0, 1)")
    if np.any(np.asarray(sigma) <= 0):
        raise DomainError("sigma must be positive")
    xi = np.asarray(xi, dtype=float)
    tail = -np.log1p(-u)
    with np.errstate(divide="ignore", invalid="ignore"):
        general = sigma * np.expm1(xi * tail) / xi
    out = np.where(np.abs(xi) < XI_TOL, sigma * tail, general)
    return float(out) if out.ndim == 0 else out


def sample_gpd(xi, sigma, rng, size=None):
    """Draw GP variates by inversion."""
    if size is None:
        size = np.broadcast(np.asarray(xi), np.asarray(sigma)).shape or None
    u = rng.random(size)
    return quantile(xi, sigma, u)
