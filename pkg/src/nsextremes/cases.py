"""Synthetic truths: directional rate, shape and scale curves, and sampling from them.

Cases 1-3 have an expected 1000 events per period, Cases 4-6 are the same
curves with five times the rate. Cases 1 and 2 share

    xi(theta)    = -0.2 + sin(theta - 30) / 10
    sigma(theta) = max(sin(theta) + cos(2 theta) + 2, 0.01)

(angles in degrees). The shape is the small, negative curve and the scale
the one in [0, 4]; the reverse assignment would give a negative scale.
``sigma`` touches zero at 270 degrees and is floored at 0.01 there.

Case 3 curves are Gaussian-bump mixtures; the default parameters only
approximate the published illustration (peak positive shape near 30
degrees, very low rate near 270) and can be replaced through the config.
"""

from dataclasses import dataclass, field

import numpy as np

from . import gpd
from .errors import ContractError
from .gpd import PeaksSample

SIGMA_FLOOR = 0.01
GRID_STEP = 0.05
LABELS = tuple(f"case{i}" for i in range(1, 7))


def _wrapped_distance(theta, centre):
    return np.mod(np.asarray(theta, dtype=float) - centre + 180.0, 360.0) - 180.0


@dataclass
class MixtureCurve:
    """``offset + sum_k weight_k * exp(-0.5 * (d(theta, mean_k) / sd_k)^2)``.

    ``d`` is the wrapped angular distance, so bumps near 0/360 stay smooth.
    Components are ``(weight, mean, sd)`` triples in degrees.
    """

    offset: float = 0.0
    components: list = field(default_factory=list)

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        out = np.full(theta.shape, float(self.offset))
        for weight, mean, sd in self.components:
            out = out + weight * np.exp(-0.5 * (_wrapped_distance(theta, mean) / sd) ** 2)
        return out

    def to_dict(self):
        return {"offset": float(self.offset), "components": [list(map(float, c)) for c in self.components]}

    @classmethod
    def from_dict(cls, data):
        comps = [tuple(float(v) for v in c) for c in data.get("components", [])]
        if any(len(c) != 3 or c[2] <= 0 for c in comps):
            raise ContractError("mixture components must be (weight, mean, sd>0) triples")
        return cls(float(data.get("offset", 0.0)), comps)


class _RateMixture:
    """Rate per degree proportional to a mixture, scaled to ``total`` events per period."""

    def __init__(self, curve, total):
        self.curve = curve
        self.total = float(total)
        grid = (np.arange(int(round(360.0 / GRID_STEP))) + 0.5) * GRID_STEP
        mass = np.sum(np.maximum(curve(grid), 0.0)) * GRID_STEP
        if mass <= 0:
            raise ContractError("rate mixture must be positive somewhere")
        self._norm = self.total / mass

    def __call__(self, theta):
        return np.maximum(self.curve(theta), 0.0) * self._norm


def _case1_shape(theta):
    return -0.2 + np.sin(np.deg2rad(np.asarray(theta, dtype=float) - 30.0)) / 10.0


def _case1_scale(theta):
    r = np.deg2rad(np.asarray(theta, dtype=float))
    return np.maximum(np.sin(r) + np.cos(2.0 * r) + 2.0, SIGMA_FLOOR)


def _case2_profile(theta):
    return np.maximum(np.sin(np.deg2rad(np.asarray(theta, dtype=float))) + 1.1, 0.0)


# Integral over [0, 360) degrees of max(sin + 1.1, 0); sin + 1.1 > 0 everywhere.
CASE2_NORMALISER = 1.1 * 360.0


@dataclass(frozen=True)
class _UniformRate:
    total: float

    def __call__(self, theta):
        return np.full(np.shape(theta), self.total / 360.0)


@dataclass(frozen=True)
class _Case2Rate:
    total: float

    def __call__(self, theta):
        return _case2_profile(theta) * self.total / CASE2_NORMALISER

CASE3_DEFAULTS = {
    "rate": {"offset": 0.0, "components": [[1.0, 60.0, 35.0], [0.8, 150.0, 30.0],
                                           [0.5, 350.0, 25.0], [0.05, 270.0, 30.0]]},
    "shape": {"offset": -0.25, "components": [[0.45, 30.0, 25.0], [0.1, 200.0, 40.0]]},
    "scale": {"offset": 0.8, "components": [[1.5, 100.0, 45.0], [0.8, 250.0, 35.0]]},
}


@dataclass
class CaseSpec:
    """A known directional truth.

    ``rate_fn`` gives expected events per degree per period;
    ``expected_total`` is its integral over the circle.
    """

    label: str
    rate_fn: object
    shape_fn: object
    scale_fn: object
    expected_total: float = None
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        grid = (np.arange(int(round(360.0 / GRID_STEP))) + 0.5) * GRID_STEP
        weights = np.maximum(np.asarray(self.rate_fn(grid), dtype=float), 0.0) * GRID_STEP
        integral = float(weights.sum())
        if self.expected_total is None:
            self.expected_total = integral
        elif abs(integral - self.expected_total) > 1e-3 * max(self.expected_total, 1e-12):
            raise ContractError(
                f"expected_total {self.expected_total} differs from the rate integral {integral}")
        self._grid_edges = np.arange(grid.size + 1) * GRID_STEP
        self._cdf = np.concatenate([[0.0], np.cumsum(weights)])
        if self._cdf[-1] > 0:
            self._cdf /= self._cdf[-1]

    def validate(self, step=0.1):
        theta = np.arange(0.0, 360.0, step)
        if np.any(self.scale_fn(theta) <= 0):
            raise ContractError(f"{self.label}: scale must be positive")
        if np.any(1.0 + self.shape_fn(theta) <= 0):
            raise ContractError(f"{self.label}: shape must exceed -1")
        if np.any(self.rate_fn(theta) < 0):
            raise ContractError(f"{self.label}: rate must be non-negative")
        return self

    def sample_directions(self, n, rng):
        """Inverse-CDF draws from ``rate / expected_total`` on a 0.05 degree grid."""
        if n == 0:
            return np.zeros(0)
        if self._cdf[-1] <= 0:
            raise ContractError(f"{self.label}: rate is zero everywhere")
        u = rng.random(n)
        cell = np.searchsorted(self._cdf, u, side="right") - 1
        cell = np.clip(cell, 0, self._cdf.size - 2)
        lo, hi = self._cdf[cell], self._cdf[cell + 1]
        frac = np.where(hi > lo, (u - lo) / np.where(hi > lo, hi - lo, 1.0), 0.5)
        theta = self._grid_edges[cell] + frac * GRID_STEP
        return np.minimum(theta, np.nextafter(360.0, 0.0))

    def to_dict(self):
        return dict(self.config) if self.config else {"label": self.label}


def truth_curves(spec, angles):
    """Rate, shape and scale of ``spec`` at ``angles``."""
    theta = np.asarray(angles, dtype=float)
    return (np.asarray(spec.rate_fn(theta), dtype=float) * np.ones_like(theta),
            np.asarray(spec.shape_fn(theta), dtype=float) * np.ones_like(theta),
            np.asarray(spec.scale_fn(theta), dtype=float) * np.ones_like(theta))


def _mixture_case(label, rate, shape, scale, total):
    rate_c, shape_c, scale_c = (MixtureCurve.from_dict(d) for d in (rate, shape, scale))
    config = {"label": label, "expected_total": float(total), "rate": rate_c.to_dict(),
              "shape": shape_c.to_dict(), "scale": scale_c.to_dict()}
    return CaseSpec(label, _RateMixture(rate_c, total), shape_c, scale_c, float(total), config)


def builtin_case(label, **overrides):
    """Case 1..6. Case 3/6 accept ``rate``/``shape``/``scale`` mixture overrides."""
    key = str(label).lower().replace(" ", "").replace("_", "")
    if key not in LABELS:
        raise ContractError(f"unknown case {label!r}; expected one of {LABELS}")
    number = int(key[-1])
    base = (number - 1) % 3 + 1
    total = 1000.0 * (5 if number > 3 else 1)
    if base == 1:
        return CaseSpec(key, _UniformRate(total), _case1_shape, _case1_scale, total)
    if base == 2:
        return CaseSpec(key, _Case2Rate(total), _case1_shape, _case1_scale, total)
    params = {name: overrides.get(name, CASE3_DEFAULTS[name]) for name in ("rate", "shape", "scale")}
    spec = _mixture_case(key, params["rate"], params["shape"], params["scale"], total)
    if not overrides:
        spec.config = {"label": key}
    return spec


def constant_case(xi, sigma, total, label="custom"):
    """Stationary truth with uniform rate; handy as an analytic reference."""
    return _mixture_case(label, {"offset": 1.0}, {"offset": xi}, {"offset": sigma}, total)


def case_from_config(data):
    """Build a case from ``"case2"`` or a mapping with a ``label`` and optional mixtures."""
    if isinstance(data, str):
        return builtin_case(data)
    data = dict(data)
    label = str(data.get("label", "custom")).lower()
    if label in LABELS:
        extra = {k: data[k] for k in ("rate", "shape", "scale") if k in data}
        return builtin_case(label, **extra)
    missing = [k for k in ("rate", "shape", "scale", "expected_total") if k not in data]
    if missing:
        raise ContractError(f"custom case needs keys {missing}")
    return _mixture_case(label, data["rate"], data["shape"], data["scale"], data["expected_total"])


def simulate_sample(spec, rng, fixed_n=None, period=1.0):
    """Draw one peaks-over-threshold sample from ``spec``.

    ``fixed_n`` draws exactly that many events; otherwise the count is
    Poisson with mean ``expected_total``.
    """
    n = int(fixed_n) if fixed_n is not None else int(rng.poisson(spec.expected_total))
    if n < 0:
        raise ContractError("fixed_n must be non-negative")
    theta = spec.sample_directions(n, rng)
    _, xi, sigma = truth_curves(spec, theta)
    sizes = gpd.sample_gpd(xi, sigma, rng) if n else np.zeros(0)
    return PeaksSample(np.atleast_1d(sizes), theta, period, {"case": spec.label})
