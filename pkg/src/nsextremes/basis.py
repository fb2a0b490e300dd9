"""Covariate bases on the periodic domain [0, 360) degrees.

Four parameterisations are supported for a parameter curve
``eta(theta) = B(theta) @ beta``:

* ``constant`` -- a single column of ones (stationary model).
* ``spline`` -- ``p`` periodic B-splines on equally spaced knots.
* ``fourier`` -- ``[1, cos(k theta), ..., sin(k theta), ...]`` for k = 1..n_p.
* ``gp`` -- nearest-node indicators on ``p`` bin centres, with the
  inverse of a periodic squared-exponential correlation as penalty.

Each comes with a roughness matrix ``R`` so that ``0.5 * lam * beta @ R @ beta``
penalises wiggly curves.
"""

from dataclasses import asdict, dataclass

import numpy as np
from scipy import linalg

from .errors import ContractError, DomainError, NumericError

KINDS = ("constant", "spline", "fourier", "gp")
_ALIASES = {
    "constant": "constant",
    "stationary": "constant",
    "spline": "spline",
    "bspline": "spline",
    "fourier": "fourier",
    "gp": "gp",
    "gaussianprocess": "gp",
    "gaussian_process": "gp",
}

GP_JITTER = 1e-8
# Largest condition number accepted for the jittered GP correlation matrix.
GP_MAX_CONDITION = 1e13


@dataclass(frozen=True)
class BasisSpec:
    """One parameterisation family and its complexity.

    Use the constructors :meth:`constant`, :meth:`spline`,
    :meth:`fourier` and :meth:`gaussian_process` rather than filling the
    fields by hand; they keep ``p`` consistent with the kind.
    """

    kind: str
    p: int
    fourier_order: int = 0
    correlation_length: float = 0.6
    spline_degree: int = 3
    periodic_penalty: bool = True

    def __post_init__(self):
        kind = _ALIASES.get(str(self.kind).lower().replace("-", "_"))
        if kind is None:
            raise ContractError(f"unknown basis kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "kind", kind)
        if kind == "constant" and self.p != 1:
            raise ContractError("constant basis requires p = 1")
        if kind == "fourier":
            if self.fourier_order < 1 or self.p != 2 * self.fourier_order + 1:
                raise ContractError("fourier basis requires p = 2 * fourier_order + 1")
        if kind in ("spline", "gp") and self.p < 2:
            raise ContractError(f"{kind} basis requires p >= 2")
        if kind == "spline" and not 0 <= self.spline_degree < self.p:
            raise ContractError("spline degree must lie in [0, p)")
        if self.correlation_length <= 0:
            raise ContractError("correlation_length must be positive")

    @classmethod
    def constant(cls):
        return cls("constant", 1)

    @classmethod
    def spline(cls, p=50, degree=3, periodic_penalty=True):
        return cls("spline", p, spline_degree=degree, periodic_penalty=periodic_penalty)

    @classmethod
    def fourier(cls, order=25):
        return cls("fourier", 2 * order + 1, fourier_order=order)

    @classmethod
    def gaussian_process(cls, p=50, correlation_length=0.6):
        return cls("gp", p, correlation_length=correlation_length)

    @classmethod
    def default(cls, kind):
        """Full-scale complexity for ``kind``: p=50 spline/GP, n_p=25 Fourier."""
        kind = _ALIASES.get(str(kind).lower().replace("-", "_"))
        if kind == "constant":
            return cls.constant()
        if kind == "spline":
            return cls.spline()
        if kind == "fourier":
            return cls.fourier()
        if kind == "gp":
            return cls.gaussian_process()
        raise ContractError(f"unknown basis kind {kind!r}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        kind = _ALIASES.get(str(data.get("kind", "")).lower().replace("-", "_"))
        if kind is None:
            raise ContractError(f"unknown basis kind {data.get('kind')!r}")
        if "p" not in data:
            base = cls.default(kind)
            if kind == "fourier" and "fourier_order" in data:
                data["p"] = 2 * int(data["fourier_order"]) + 1
            else:
                data["p"] = base.p
                data.setdefault("fourier_order", base.fourier_order)
        if kind == "fourier" and "fourier_order" not in data:
            data["fourier_order"] = (int(data["p"]) - 1) // 2
        fields = {"kind", "p", "fourier_order", "correlation_length",
                  "spline_degree", "periodic_penalty"}
        unknown = set(data) - fields
        if unknown:
            raise ContractError(f"unknown basis keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class BasisMatrix:
    """Design matrix ``values`` (N x p) evaluated at ``angles`` (degrees)."""

    values: np.ndarray
    angles: np.ndarray

    @property
    def shape(self):
        return self.values.shape


def check_angles(angles):
    theta = np.atleast_1d(np.asarray(angles, dtype=float))
    if theta.ndim != 1:
        raise ContractError("angles must be one-dimensional")
    if theta.size and (not np.all(np.isfinite(theta)) or theta.min() < 0.0 or theta.max() >= 360.0):
        raise DomainError("angles must lie in [0, 360) degrees")
    return theta


def node_angles(spec):
    """GP node positions: the centres of ``p`` equal bins on [0, 360)."""
    return (np.arange(spec.p) + 0.5) * 360.0 / spec.p


def _spline_local(spec, theta):
    """Indices and values of the d+1 non-zero periodic B-splines at each angle.

    Basis ``j`` is the cardinal B-spline of degree ``d`` starting at knot ``j``,
    wrapped modulo ``p``. Returns ``(idx, vals)`` of shape ``(N, d+1)``.
    """
    p, d = spec.p, spec.spline_degree
    u = theta * p / 360.0
    i = np.floor(u)
    t = u - i
    i = i.astype(np.intp)
    vals = np.ones((theta.size, 1))
    for k in range(1, d + 1):
        new = np.zeros((theta.size, k + 1))
        for r in range(k + 1):
            s = t + r
            if r < k:
                new[:, r] += s * vals[:, r]
            if r > 0:
                new[:, r] += (k + 1 - s) * vals[:, r - 1]
        vals = new / k
    idx = np.mod(i[:, None] - np.arange(d + 1)[None, :], p)
    return idx, vals


def _gp_index(spec, theta):
    # Nearest bin centre; a point on a bin edge is equidistant from two
    # nodes and goes to the lower index.
    u = theta * spec.p / 360.0
    idx = np.floor(u).astype(np.intp)
    on_edge = (u == idx) & (idx > 0)
    idx[on_edge] -= 1
    return np.minimum(idx, spec.p - 1)


def evaluate_basis(spec, angles):
    """Evaluate the N x p design matrix of ``spec`` at ``angles`` (degrees)."""
    theta = check_angles(angles)
    n, p = theta.size, spec.p
    if spec.kind == "constant":
        values = np.ones((n, 1))
    elif spec.kind == "fourier":
        rad = np.deg2rad(theta)
        k = np.arange(1, spec.fourier_order + 1)
        arg = rad[:, None] * k[None, :]
        values = np.hstack([np.ones((n, 1)), np.cos(arg), np.sin(arg)])
    elif spec.kind == "gp":
        values = np.zeros((n, p))
        values[np.arange(n), _gp_index(spec, theta)] = 1.0
    else:
        idx, vals = _spline_local(spec, theta)
        values = np.zeros((n, p))
        rows = np.repeat(np.arange(n), idx.shape[1])
        np.add.at(values, (rows, idx.ravel()), vals.ravel())
    return BasisMatrix(values=values, angles=theta)


def param_curve(spec, coeffs, angles):
    """Return ``B(theta) @ beta`` without forming the dense design matrix."""
    beta = np.asarray(coeffs, dtype=float)
    if beta.shape != (spec.p,):
        raise ContractError(f"expected {spec.p} coefficients, got shape {beta.shape}")
    theta = check_angles(angles)
    if spec.kind == "constant":
        return np.full(theta.size, beta[0])
    if spec.kind == "gp":
        return beta[_gp_index(spec, theta)]
    if spec.kind == "spline":
        idx, vals = _spline_local(spec, theta)
        return np.sum(vals * beta[idx], axis=1)
    n_p = spec.fourier_order
    rad = np.deg2rad(theta)
    k = np.arange(1, n_p + 1)
    arg = rad[:, None] * k[None, :]
    return beta[0] + np.cos(arg) @ beta[1:n_p + 1] + np.sin(arg) @ beta[n_p + 1:]


def difference_matrix(p, periodic=True):
    """First-difference operator; the periodic form adds the wrap row ``beta_0 - beta_{p-1}``."""
    rows = p if periodic else p - 1
    D = np.zeros((rows, p))
    for i in range(rows):
        D[i, i] = -1.0
        D[i, (i + 1) % p] = 1.0
    return D


def gp_correlation(spec):
    """Periodic squared-exponential correlation between the GP nodes."""
    phi = np.deg2rad(node_angles(spec))
    diff = phi[:, None] - phi[None, :]
    return np.exp(-(2.0 / spec.correlation_length ** 2) * np.sin(diff / 2.0) ** 2)


def roughness_matrix(spec):
    """Penalty matrix ``R`` (p x p, symmetric) for ``spec``."""
    if spec.kind == "constant":
        return np.ones((1, 1))
    if spec.kind == "spline":
        D = difference_matrix(spec.p, periodic=spec.periodic_penalty)
        return D.T @ D
    if spec.kind == "fourier":
        k4 = np.arange(1, spec.fourier_order + 1, dtype=float) ** 4
        return np.diag(np.concatenate([[0.0], k4, k4]))
    C = gp_correlation(spec) + GP_JITTER * np.eye(spec.p)
    cond = np.linalg.cond(C)
    if not np.isfinite(cond) or cond > GP_MAX_CONDITION:
        raise NumericError(
            f"GP correlation matrix is numerically singular after jitter "
            f"(condition number {cond:.3e}, p={spec.p}, r={spec.correlation_length})")
    try:
        factor = linalg.cho_factor(C, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericError(f"GP correlation matrix not positive definite (condition {cond:.3e})") from exc
    R = linalg.cho_solve(factor, np.eye(spec.p))
    return 0.5 * (R + R.T)


@dataclass(frozen=True)
class CovariateModel:
    """A basis evaluated at the sample angles, bundled with its penalty."""

    spec: BasisSpec
    B: np.ndarray
    R: np.ndarray

    @classmethod
    def build(cls, spec, angles):
        return cls(spec, evaluate_basis(spec, angles).values, roughness_matrix(spec))

    @property
    def p(self):
        return self.spec.p

    def subset(self, index):
        return CovariateModel(self.spec, self.B[index], self.R)
