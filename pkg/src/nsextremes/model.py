"""Coefficient states, designs and collections of parameter draws."""

from dataclasses import dataclass, field, replace

import numpy as np

from .basis import BasisSpec, CovariateModel, param_curve
from .errors import ContractError
from .gpd import PointwiseParams


@dataclass
class CoefficientState:
    """Basis coefficients for shape and adjusted scale plus their roughness coefficients."""

    beta_xi: np.ndarray
    beta_nu: np.ndarray
    lambda_xi: float = 1.0
    lambda_nu: float = 1.0

    def __post_init__(self):
        self.beta_xi = np.atleast_1d(np.asarray(self.beta_xi, dtype=float)).copy()
        self.beta_nu = np.atleast_1d(np.asarray(self.beta_nu, dtype=float)).copy()
        self.lambda_xi = float(self.lambda_xi)
        self.lambda_nu = float(self.lambda_nu)

    def copy(self, **changes):
        out = replace(self, beta_xi=self.beta_xi.copy(), beta_nu=self.beta_nu.copy())
        return replace(out, **changes) if changes else out

    def beta(self, block):
        return self.beta_xi if block == "xi" else self.beta_nu

    def lam(self, block):
        return self.lambda_xi if block == "xi" else self.lambda_nu

    def with_beta(self, block, beta):
        return self.copy(**{f"beta_{block}": beta})

    def to_vector(self):
        return np.concatenate([[self.lambda_xi, self.lambda_nu], self.beta_xi, self.beta_nu])


@dataclass(frozen=True)
class Design:
    """Shape and adjusted-scale bases evaluated at one sample's angles."""

    xi: CovariateModel
    nu: CovariateModel

    @classmethod
    def build(cls, spec_xi, spec_nu, angles):
        return cls(CovariateModel.build(spec_xi, angles), CovariateModel.build(spec_nu, angles))

    def block(self, name):
        return self.xi if name == "xi" else self.nu

    @property
    def n(self):
        return self.xi.B.shape[0]

    def subset(self, index):
        return Design(self.xi.subset(index), self.nu.subset(index))

    def check_state(self, state):
        if state.beta_xi.shape != (self.xi.p,) or state.beta_nu.shape != (self.nu.p,):
            raise ContractError(
                f"state has {state.beta_xi.size}/{state.beta_nu.size} coefficients, "
                f"design expects {self.xi.p}/{self.nu.p}")

    def pointwise(self, state):
        self.check_state(state)
        return PointwiseParams(self.xi.B @ state.beta_xi, self.nu.B @ state.beta_nu)

    def penalty(self, state):
        return 0.5 * (state.lambda_xi * state.beta_xi @ self.xi.R @ state.beta_xi
                      + state.lambda_nu * state.beta_nu @ self.nu.R @ state.beta_nu)


def broadcast_constant(spec, value):
    """Coefficients whose curve equals ``value`` everywhere."""
    beta = np.zeros(spec.p)
    if spec.kind == "fourier":
        beta[0] = value
    else:
        beta[:] = value
    return beta


@dataclass
class PosteriorDraws:
    """An ordered set of coefficient states: an MCMC chain or a bootstrap set.

    Coefficients are stored row-wise (one draw per row).
    """

    beta_xi: np.ndarray
    beta_nu: np.ndarray
    lambda_xi: np.ndarray
    lambda_nu: np.ndarray
    spec_xi: BasisSpec
    spec_nu: BasisSpec
    source: str = "mcmc"
    elapsed_hours: float = 0.0
    accept_counts: dict = field(default_factory=dict)
    proposal_counts: dict = field(default_factory=dict)
    converged: np.ndarray | None = None
    traces: dict = field(default_factory=dict)

    def __post_init__(self):
        self.beta_xi = np.atleast_2d(np.asarray(self.beta_xi, dtype=float))
        self.beta_nu = np.atleast_2d(np.asarray(self.beta_nu, dtype=float))
        self.lambda_xi = np.atleast_1d(np.asarray(self.lambda_xi, dtype=float))
        self.lambda_nu = np.atleast_1d(np.asarray(self.lambda_nu, dtype=float))
        m = self.beta_xi.shape[0]
        if not (self.beta_nu.shape[0] == self.lambda_xi.size == self.lambda_nu.size == m):
            raise ContractError("draw arrays must share their first dimension")
        if self.source not in ("mcmc", "bootstrap"):
            raise ContractError(f"unknown draws source {self.source!r}")

    @classmethod
    def from_states(cls, states, spec_xi, spec_nu, **kwargs):
        states = list(states)
        if not states:
            raise ContractError("no states")
        return cls(np.array([s.beta_xi for s in states]), np.array([s.beta_nu for s in states]),
                   np.array([s.lambda_xi for s in states]), np.array([s.lambda_nu for s in states]),
                   spec_xi, spec_nu, **kwargs)

    def __len__(self):
        return self.beta_xi.shape[0]

    def state(self, i):
        return CoefficientState(self.beta_xi[i], self.beta_nu[i], self.lambda_xi[i], self.lambda_nu[i])

    @property
    def states(self):
        return [self.state(i) for i in range(len(self))]

    def acceptance_rates(self):
        return {k: self.accept_counts[k] / self.proposal_counts[k]
                for k in self.accept_counts if self.proposal_counts.get(k)}

    def usable(self):
        """Indices of draws that may be used downstream (converged bootstrap fits)."""
        if self.converged is None:
            return np.arange(len(self))
        return np.flatnonzero(self.converged)

    def monitored(self):
        """Scalar summaries tracked for efficiency: every coefficient and both lambdas."""
        return np.column_stack([self.beta_xi, self.beta_nu, self.lambda_xi, self.lambda_nu])

    def curves(self, angles, index=None):
        """Shape and scale curves at ``angles`` for each selected draw: two (m, n) arrays."""
        idx = range(len(self)) if index is None else index
        xi = np.array([param_curve(self.spec_xi, self.beta_xi[i], angles) for i in idx])
        nu = np.array([param_curve(self.spec_nu, self.beta_nu[i], angles) for i in idx])
        with np.errstate(divide="ignore", invalid="ignore"):
            sigma = nu / (1.0 + xi)
        return xi, sigma
