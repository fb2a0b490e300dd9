"""Return-value distributions: maxima over a long return period, per octant and overall."""

import logging
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from . import gpd
from ._backend import kernels
from ._parallel import ordered_map
from .basis import param_curve
from .cases import CaseSpec, truth_curves
from .errors import ContractError, NumericError
from .model import PosteriorDraws

log = logging.getLogger(__name__)

OCTANT_WIDTH = 45.0
MAX_STATE_RESAMPLES = 100


@dataclass(frozen=True)
class SectorSet:
    """Eight half-open octants ``[c - 22.5, c + 22.5)`` centred on 0, 45, ..., 315, plus omni."""

    names: tuple = ("N", "NE", "E", "SE", "S", "SW", "W", "NW")
    omni: str = "omni"

    @property
    def centres(self):
        return np.arange(len(self.names)) * OCTANT_WIDTH

    @property
    def all_names(self):
        return self.names + (self.omni,)

    def index(self, angles):
        """Octant index of each angle; ties at an edge go to the octant that starts there."""
        u = np.mod(np.asarray(angles, dtype=float) + 0.5 * OCTANT_WIDTH, 360.0)
        return np.minimum((u // OCTANT_WIDTH).astype(int), len(self.names) - 1)

    def maxima(self, angles, sizes):
        """Per-octant maxima followed by the omnidirectional maximum; empty sectors give 0."""
        return kernels.sector_maxima(np.asarray(angles, dtype=float), np.asarray(sizes, dtype=float),
                                     OCTANT_WIDTH)


OCTANTS = SectorSet()


@dataclass
class EmpiricalDistribution:
    values: np.ndarray
    sector: str = "omni"

    def __post_init__(self):
        self.values = np.sort(np.asarray(self.values, dtype=float).ravel())

    @property
    def replicates(self):
        return self.values.size

    def cdf(self, x):
        """Right-continuous ECDF."""
        if self.replicates == 0:
            raise ContractError("empty distribution")
        return np.searchsorted(self.values, np.asarray(x, dtype=float), side="right") / self.replicates


def percentile(dist, q):
    """Order-statistic quantile with linear interpolation between ranks."""
    if dist.replicates == 0:
        raise ContractError("percentile of an empty distribution")
    if not 0 < q < 1:
        raise ContractError("q must lie in (0, 1)")
    return float(np.quantile(dist.values, q, method="linear"))


@dataclass
class ReturnValues:
    """Simulated return-period maxima: one row per replicate, one column per sector."""

    maxima: np.ndarray
    sectors: SectorSet = OCTANTS
    resampled_states: int = 0
    state_index: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def __getitem__(self, sector):
        col = self.sectors.all_names.index(sector)
        return EmpiricalDistribution(self.maxima[:, col], sector)

    def distributions(self):
        return {name: self[name] for name in self.sectors.all_names}

    def summary(self, q=0.375):
        return {name: percentile(dist, q) for name, dist in self.distributions().items()}


class _StateCurves:
    """Evaluate shape and scale at new directions for one source of parameters."""

    def __init__(self, source):
        self.source = source

    def __len__(self):
        return 1 if isinstance(self.source, CaseSpec) else self.source.usable().size

    def __call__(self, k, angles):
        if isinstance(self.source, CaseSpec):
            _, xi, sigma = truth_curves(self.source, angles)
            return xi, sigma
        i = self.source.usable()[k]
        xi = param_curve(self.source.spec_xi, self.source.beta_xi[i], angles)
        nu = param_curve(self.source.spec_nu, self.source.beta_nu[i], angles)
        if np.any(1.0 + xi <= 0) or np.any(nu <= 0):
            return None
        return xi, nu / (1.0 + xi)


def _replicate(seed, curves, rate_case, mean_events):
    rng = np.random.default_rng(seed)
    k_events = int(rng.poisson(mean_events))
    n_states = len(curves)
    for attempt in range(MAX_STATE_RESAMPLES):
        k = int(rng.integers(n_states))
        angles = rate_case.sample_directions(k_events, rng)
        params = curves(k, angles)
        if params is not None:
            break
    else:
        raise NumericError(f"no feasible parameter state after {MAX_STATE_RESAMPLES} attempts")
    sizes = gpd.sample_gpd(params[0], params[1], rng) if k_events else np.zeros(0)
    return OCTANTS.maxima(angles, np.atleast_1d(sizes)), k, attempt


def simulate_return_distribution(source, rate_case=None, factor=10.0, replicates=1000, rng=None,
                                 workers=1):
    """Maxima over ``factor`` periods for each of ``replicates`` independent realisations.

    ``source`` is the truth (a :class:`CaseSpec`) or a set of fitted
    draws (:class:`PosteriorDraws`); one parameter state is drawn per
    replicate. Directions always follow ``rate_case``'s rate, which
    defaults to ``source`` when that is a case.
    """
    if replicates < 1:
        raise ContractError("replicates must be >= 1")
    if factor < 0:
        raise ContractError("factor must be non-negative")
    if rate_case is None:
        if not isinstance(source, CaseSpec):
            raise ContractError("model-based simulation needs the rate of a CaseSpec")
        rate_case = source
    if isinstance(source, PosteriorDraws) and source.usable().size == 0:
        raise ContractError("no usable parameter draws")
    curves = _StateCurves(source)
    seeds = np.random.SeedSequence(np.random.default_rng(rng).integers(2 ** 63)).spawn(replicates)
    out = ordered_map(partial(_replicate, curves=curves, rate_case=rate_case,
                              mean_events=factor * rate_case.expected_total), seeds, workers)
    resampled = sum(a for _, _, a in out)
    if resampled:
        log.warning("%d infeasible parameter states were redrawn", resampled)
    return ReturnValues(np.array([m for m, _, _ in out]), OCTANTS, resampled,
                        np.array([k for _, k, _ in out], dtype=int))
