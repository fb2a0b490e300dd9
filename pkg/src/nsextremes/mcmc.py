"""Metropolis-within-Gibbs sampling of basis coefficients and roughness precisions.

Each iteration updates the ``nu`` coefficients, then the ``xi``
coefficients (random-walk MH or simplified mMALA), then draws
``lambda_nu`` and ``lambda_xi`` from their Gamma full conditionals.
"""

import logging
import math
import time
from dataclasses import asdict, dataclass
from functools import partial

import numpy as np
from scipy import linalg

from . import gpd
from ._parallel import ordered_map
from .errors import ContractError, DomainError, NumericError
from .mle import WEIGHT_FLOOR, stationary_init
from .model import Design, PosteriorDraws

log = logging.getLogger(__name__)

SAMPLERS = ("mh", "mmala")
BLOCKS = ("nu", "xi")
ADAPT_EXPONENT = 0.6
QUAD_TOL = 1e-10


@dataclass
class ChainConfig:
    """Sampler settings. ``step_*=None`` picks a scale-aware starting step."""

    sampler: str = "mmala"
    n_iterations: int = 2500
    burn_in: int = 500
    step_xi: float | None = None
    step_nu: float | None = None
    scale_kappa_xi: float = 1.0
    scale_kappa_nu: float = 1.0
    prior_a: float = 1e-3
    prior_b: float = 1e-3
    adapt_target: float = 0.25
    seed: int = 0

    def __post_init__(self):
        self.sampler = str(self.sampler).lower()
        if self.sampler not in SAMPLERS:
            raise ContractError(f"sampler must be one of {SAMPLERS}, got {self.sampler!r}")
        if self.n_iterations < 1 or self.burn_in < 0 or self.burn_in >= self.n_iterations:
            raise ContractError("need n_iterations >= 1 and 0 <= burn_in < n_iterations")
        for name in ("step_xi", "step_nu"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ContractError(f"{name} must be positive")
        if min(self.scale_kappa_xi, self.scale_kappa_nu, self.prior_a, self.prior_b) <= 0:
            raise ContractError("kappa and Gamma hyper-parameters must be positive")
        if not 0 < self.adapt_target < 1:
            raise ContractError("adapt_target must lie in (0, 1)")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ContractError(f"unknown chain config keys: {sorted(unknown)}")
        return cls(**data)


def gibbs_update_precision(beta, R, a, b, rng):
    """Draw ``lambda ~ Gamma(a + p/2, rate = b + beta'R beta / 2)``."""
    beta = np.asarray(beta, dtype=float)
    quad = float(beta @ R @ beta)
    if quad < -QUAD_TOL:
        raise NumericError(f"negative quadratic form beta'R beta = {quad:.3e}")
    rate = b + 0.5 * max(quad, 0.0)
    return float(rng.gamma(a + 0.5 * beta.size, 1.0 / rate))


def log_conditional(block, beta, state, sample, design):
    """Log-likelihood minus ``0.5 lam beta'R beta`` for one block; ``-inf`` if infeasible."""
    trial = state.with_beta(block, beta)
    params = design.pointwise(trial)
    value = gpd.log_likelihood(sample.sizes, params.xi, params.nu)
    if not np.isfinite(value):
        return -np.inf
    model = design.block(block)
    return float(value - 0.5 * trial.lam(block) * trial.beta(block) @ model.R @ trial.beta(block))


def grad_log_conditional(block, beta, state, sample, design):
    """``B'(dl/d eta) - lam R beta``. Undefined (DomainError) outside the support."""
    trial = state.with_beta(block, beta)
    params = design.pointwise(trial)
    dxi, dnu = gpd.score(sample.sizes, params.xi, params.nu)
    model = design.block(block)
    g = dxi if block == "xi" else dnu
    return model.B.T @ g - trial.lam(block) * model.R @ trial.beta(block)


def mh_matrix(B, R, kappa):
    """``(B'B + kappa R)^-1``; state-independent, so compute it once per chain."""
    try:
        return linalg.inv(B.T @ B + kappa * R)
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericError("B'B + kappa R is singular") from exc


def mh_propose(beta, M, eps, rng):
    """Random walk ``beta + eps M z``; symmetric because ``M`` is fixed."""
    beta = np.asarray(beta, dtype=float)
    return beta + eps * (M @ rng.standard_normal(beta.size))


def metric(block, beta, state, design):
    """Expected Hessian ``B' diag(I) B + lam R`` of the negative log conditional.

    The ``nu`` weight uses ``max(1 + 2 xi, WEIGHT_FLOOR)`` as in IRLS.
    """
    trial = state.with_beta(block, beta)
    params = design.pointwise(trial)
    if not params.feasible:
        raise DomainError("metric undefined at an infeasible state")
    if block == "xi":
        w = 1.0 / (1.0 + params.xi) ** 2
    else:
        w = 1.0 / (params.nu ** 2 * np.maximum(1.0 + 2.0 * params.xi, WEIGHT_FLOOR))
    model = design.block(block)
    return (model.B * w[:, None]).T @ model.B + trial.lam(block) * model.R


def _cholesky(H):
    try:
        return linalg.cholesky(H, lower=True)
    except linalg.LinAlgError as exc:
        eig = linalg.eigvalsh(H)
        raise NumericError(f"mMALA metric not positive definite: eigenvalues in "
                           f"[{eig.min():.3e}, {eig.max():.3e}]") from exc


def _langevin(block, beta, state, sample, design, eps):
    """Proposal mean and metric Cholesky factor at ``beta``."""
    g = grad_log_conditional(block, beta, state, sample, design)
    L = _cholesky(metric(block, beta, state, design))
    drift = linalg.cho_solve((L, True), g)
    return beta + 0.5 * eps ** 2 * drift, L


def _log_q(x, mean, L, eps):
    # log N(x; mean, eps^2 H^-1) with H = L L'
    r = L.T @ (x - mean)
    k = x.size
    return float(-0.5 * k * math.log(2.0 * math.pi * eps ** 2) + np.sum(np.log(np.diag(L)))
                 - 0.5 * (r @ r) / eps ** 2)


def mmala_propose(block, beta, state, sample, design, eps, rng):
    """Simplified mMALA proposal: returns ``(proposal, log_q_forward, log_q_backward)``.

    ``log_q_backward`` is ``-inf`` when the proposal is outside the support,
    so the move is rejected.
    """
    beta = np.asarray(beta, dtype=float)
    mean, L = _langevin(block, beta, state, sample, design, eps)
    z = rng.standard_normal(beta.size)
    proposal = mean + eps * linalg.solve_triangular(L.T, z, lower=False)
    fwd = _log_q(proposal, mean, L, eps)
    try:
        mean_b, L_b = _langevin(block, proposal, state, sample, design, eps)
    except (DomainError, NumericError):
        return proposal, fwd, -np.inf
    return proposal, fwd, _log_q(beta, mean_b, L_b, eps)


def acceptance_probability(current_logpost, proposal_logpost, log_q_fwd=0.0, log_q_bwd=0.0):
    if not np.isfinite(current_logpost):
        raise ContractError("current log posterior must be finite")
    if not np.isfinite(proposal_logpost) or not np.isfinite(log_q_bwd):
        return 0.0
    log_ratio = proposal_logpost - current_logpost + log_q_bwd - log_q_fwd
    return 1.0 if log_ratio >= 0 else math.exp(log_ratio)


def accept(current_logpost, proposal_logpost, log_q_fwd, log_q_bwd, rng):
    """Metropolis-Hastings decision; an infeasible proposal is always rejected."""
    prob = acceptance_probability(current_logpost, proposal_logpost, log_q_fwd, log_q_bwd)
    return bool(rng.random() < prob)


def default_step(config, block, model, state, design):
    """Starting step size before adaptation.

    mMALA steps are in units of the metric, so 1 is a natural start. For
    MH the proposal covariance ``eps^2 M M'`` is matched to a rough
    posterior covariance ``(B'B)^-1 s^2`` with ``s`` the parameter scale.
    """
    if config.sampler == "mmala":
        return 1.0
    params = design.pointwise(state)
    scale = float(np.mean(1.0 + params.xi)) if block == "xi" else float(np.mean(params.nu))
    kappa = config.scale_kappa_xi if block == "xi" else config.scale_kappa_nu
    G = model.B.T @ model.B + kappa * model.R
    return 2.38 / math.sqrt(model.p) * scale * math.sqrt(np.trace(G) / model.p)


def run_chain(sample, spec_xi, spec_nu, config=None, init=None):
    """Run one chain. State 0 is ``init``; states ``burn_in .. n_iterations-1`` are returned.

    Step sizes adapt (Robbins-Monro on ``log eps`` toward ``adapt_target``)
    only while producing states ``1 .. burn_in``.
    """
    config = config or ChainConfig()
    t0 = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    design = Design.build(spec_xi, spec_nu, sample.angles)
    state = init.copy() if init is not None else stationary_init(sample, spec_xi, spec_nu)
    design.check_state(state)
    if not np.isfinite(log_conditional("nu", state.beta_nu, state, sample, design)):
        raise ContractError("initial state is infeasible: "
                            + gpd.infeasibility_message(sample, design.pointwise(state)))

    steps = {"xi": config.step_xi, "nu": config.step_nu}
    M = {}
    for b in BLOCKS:
        model = design.block(b)
        if steps[b] is None:
            steps[b] = default_step(config, b, model, state, design)
        if config.sampler == "mh":
            kappa = config.scale_kappa_xi if b == "xi" else config.scale_kappa_nu
            M[b] = mh_matrix(model.B, model.R, kappa)
    log_eps = {b: math.log(steps[b]) for b in BLOCKS}

    accepted = {b: 0 for b in BLOCKS}
    proposed = {b: 0 for b in BLOCKS}
    kept = [state.copy()] if config.burn_in == 0 else []
    trace = {"step_xi": [], "step_nu": [], "log_lik": []}

    def record():
        params = design.pointwise(state)
        trace["step_xi"].append(math.exp(log_eps["xi"]))
        trace["step_nu"].append(math.exp(log_eps["nu"]))
        trace["log_lik"].append(gpd.log_likelihood(sample.sizes, params.xi, params.nu))

    if config.burn_in == 0:
        record()

    for t in range(1, config.n_iterations):
        adapting = t <= config.burn_in
        for b in BLOCKS:
            eps = math.exp(log_eps[b])
            beta = state.beta(b)
            current = log_conditional(b, beta, state, sample, design)
            if config.sampler == "mh":
                prop, q_f, q_b = mh_propose(beta, M[b], eps, rng), 0.0, 0.0
            else:
                prop, q_f, q_b = mmala_propose(b, beta, state, sample, design, eps, rng)
            target = log_conditional(b, prop, state, sample, design)
            prob = acceptance_probability(current, target, q_f, q_b)
            if rng.random() < prob:
                state = state.with_beta(b, prop)
                if not adapting:
                    accepted[b] += 1
            if not adapting:
                proposed[b] += 1
            else:
                log_eps[b] += (t + 1) ** -ADAPT_EXPONENT * (prob - config.adapt_target)
        for b in BLOCKS:
            lam = gibbs_update_precision(state.beta(b), design.block(b).R,
                                         config.prior_a, config.prior_b, rng)
            state = state.copy(**{f"lambda_{b}": lam})
        if t >= config.burn_in:
            kept.append(state.copy())
            record()

    hours = max((time.perf_counter() - t0) / 3600.0, 1e-12)
    draws = PosteriorDraws.from_states(
        kept, spec_xi, spec_nu, source="mcmc", elapsed_hours=hours,
        accept_counts={f"beta_{b}": accepted[b] for b in BLOCKS},
        proposal_counts={f"beta_{b}": proposed[b] for b in BLOCKS},
        traces={k: np.asarray(v) for k, v in trace.items()})
    rates = draws.acceptance_rates()
    if rates:
        log.info("chain %s seed=%d acceptance %s", config.sampler, config.seed,
                 {k: round(v, 3) for k, v in rates.items()})
    return draws


def _chain_job(config, sample, spec_xi, spec_nu, init):
    return run_chain(sample, spec_xi, spec_nu, config, init)


def run_chains(sample, spec_xi, spec_nu, configs, init=None, workers=1):
    """Independent chains (one per config/seed) in input order."""
    return ordered_map(partial(_chain_job, sample=sample, spec_xi=spec_xi, spec_nu=spec_nu, init=init),
                       list(configs), workers)
