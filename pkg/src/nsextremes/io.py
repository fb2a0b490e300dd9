"""Run configuration and plain-text persistence.

Every table is comma-separated with a leading ``# key=value ...`` comment
line (always including ``config=<hash>``) and a column-name row.
Writes go through a temporary file and ``os.replace`` so readers never
see a half-written artifact.
"""

import hashlib
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .basis import BasisSpec
from .errors import ContractError
from .gpd import PeaksSample
from .mcmc import ChainConfig
from .mle import DEFAULT_LAMBDA_GRID
from .model import PosteriorDraws

METHODS = ("mle", "mh", "mmala")


class ConfigError(ContractError):
    """Invalid or inconsistent run configuration."""


def _float_list(values):
    return [float(v) for v in values]


@dataclass
class MLEControls:
    k: int = 5
    m_bs: int = 100
    grid_xi: list = field(default_factory=lambda: _float_list(DEFAULT_LAMBDA_GRID))
    grid_nu: list = field(default_factory=lambda: _float_list(DEFAULT_LAMBDA_GRID))


@dataclass
class ReturnControls:
    factor: float = 10.0
    replicates: int = 1000
    q: float = 0.375


@dataclass
class RunConfig:
    """Everything needed to reproduce one simulate / fit / return-values run."""

    seed: int
    case: object = "case1"
    sample: str | None = None
    # None: exactly round(expected_total) events; "poisson": a Poisson count
    n: int | str | None = None
    basis_xi: BasisSpec = field(default_factory=BasisSpec.spline)
    basis_nu: BasisSpec = field(default_factory=BasisSpec.spline)
    method: str = "mmala"
    mcmc: dict = field(default_factory=dict)
    mle: MLEControls = field(default_factory=MLEControls)
    return_values: ReturnControls = field(default_factory=ReturnControls)
    out: str = "out"
    workers: int = 1

    def __post_init__(self):
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)):
            raise ConfigError("seed is mandatory and must be an integer")
        self.method = str(self.method).lower()
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if isinstance(self.n, str):
            if self.n.lower() != "poisson":
                raise ConfigError(f"n must be an integer, null or 'poisson', got {self.n!r}")
            self.n = "poisson"
        elif self.n is not None and (isinstance(self.n, bool) or int(self.n) < 0):
            raise ConfigError("n must be non-negative")
        if self.sample is not None and not Path(self.sample).exists():
            raise ConfigError(f"sample file not found: {self.sample}")
        if int(self.workers) < 1:
            raise ConfigError("workers must be >= 1")

    def chain_config(self, seed=None):
        data = dict(self.mcmc)
        data["sampler"] = self.method
        data["seed"] = self.seed if seed is None else seed
        return ChainConfig.from_dict(data)

    def to_dict(self):
        return {
            "seed": int(self.seed), "case": self.case, "sample": self.sample, "n": self.n,
            "basis": {"xi": self.basis_xi.to_dict(), "nu": self.basis_nu.to_dict()},
            "method": self.method, "mcmc": dict(self.mcmc), "mle": asdict(self.mle),
            "return_values": asdict(self.return_values), "out": self.out, "workers": int(self.workers),
        }

    def digest(self):
        """Short hash of the settings that determine results (not ``out``/``workers``)."""
        data = self.to_dict()
        data.pop("out")
        data.pop("workers")
        text = json.dumps(data, sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()[:12]

    @classmethod
    def from_dict(cls, data):
        data = dict(data or {})
        known = {"seed", "case", "sample", "n", "basis", "method", "mcmc", "mle", "return_values",
                 "out", "workers"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "seed" not in data:
            raise ConfigError("seed is mandatory")
        basis = data.pop("basis", "spline")
        try:
            bx, bn = parse_basis_pair(basis)
            mle = MLEControls(**(data.pop("mle", None) or {}))
            rv = ReturnControls(**(data.pop("return_values", None) or {}))
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        cfg = cls(basis_xi=bx, basis_nu=bn, mle=mle, return_values=rv, **data)
        if cfg.method != "mle":
            cfg.chain_config()
        return cfg


def parse_basis(value):
    if isinstance(value, BasisSpec):
        return value
    if isinstance(value, str):
        return BasisSpec.default(value)
    return BasisSpec.from_dict(value)


def parse_basis_pair(value):
    """``"spline"``, ``{kind: spline, p: 20}`` or ``{xi: ..., nu: ...}``."""
    if isinstance(value, dict) and ("xi" in value or "nu" in value):
        if set(value) - {"xi", "nu"}:
            raise ConfigError("basis mapping must only have 'xi' and 'nu' keys")
        return parse_basis(value.get("xi", "spline")), parse_basis(value.get("nu", "spline"))
    spec = parse_basis(value)
    return spec, spec


def load_config(path, overrides=None):
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a mapping")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return RunConfig.from_dict(data)


# -- low-level text I/O ----------------------------------------------------------------

def atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def header_line(meta):
    return "# " + " ".join(f"{k}={_fmt(v)}" for k, v in meta.items())


def write_table(path, columns, rows, meta):
    lines = [header_line(meta), ",".join(columns)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    atomic_write(path, "\n".join(lines) + "\n")


def read_table(path):
    """Returns ``(meta, columns, rows)`` with rows as lists of strings."""
    with open(path) as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ContractError(f"{path}: missing '# key=value' header")
    meta = dict(tok.split("=", 1) for tok in lines[0][1:].split() if "=" in tok)
    if len(lines) < 2:
        raise ContractError(f"{path}: missing column row")
    columns = lines[1].split(",")
    rows = [line.split(",") for line in lines[2:]]
    if any(len(r) != len(columns) for r in rows):
        raise ContractError(f"{path}: ragged rows")
    return meta, columns, rows


def write_yaml(path, data):
    atomic_write(path, yaml.safe_dump(data, sort_keys=True))


def read_yaml(path):
    with open(path) as fh:
        return yaml.safe_load(fh)


# -- domain objects --------------------------------------------------------------------

def write_sample(path, sample, case, seed, config_hash):
    meta = {"case": case, "seed": int(seed), "period": float(sample.period), "config": config_hash}
    write_table(path, ["angle_deg", "size"], zip(sample.angles, sample.sizes), meta)


def read_sample(path):
    meta, columns, rows = read_table(path)
    if columns != ["angle_deg", "size"]:
        raise ContractError(f"{path}: expected columns angle_deg,size")
    data = np.array(rows, dtype=float).reshape(-1, 2)
    return PeaksSample(data[:, 1], data[:, 0], float(meta.get("period", 1.0)), meta)


def write_draws(path, draws, config_hash):
    px, pn = draws.beta_xi.shape[1], draws.beta_nu.shape[1]
    columns = (["index", "lambda_xi", "lambda_nu", "converged"]
               + [f"beta_xi_{j}" for j in range(px)] + [f"beta_nu_{j}" for j in range(pn)])
    conv = draws.converged if draws.converged is not None else np.ones(len(draws), dtype=bool)
    rows = [[i, draws.lambda_xi[i], draws.lambda_nu[i], int(conv[i]), *draws.beta_xi[i], *draws.beta_nu[i]]
            for i in range(len(draws))]
    write_table(path, columns, rows, {"source": draws.source, "config": config_hash})


def read_draws(path, spec_xi, spec_nu, elapsed_hours=1e-12):
    meta, columns, rows = read_table(path)
    data = np.array(rows, dtype=float).reshape(-1, len(columns))
    if data.shape[0] == 0:
        raise ContractError(f"{path}: no draws")
    px = sum(c.startswith("beta_xi_") for c in columns)
    pn = sum(c.startswith("beta_nu_") for c in columns)
    if (px, pn) != (spec_xi.p, spec_nu.p):
        raise ContractError(f"{path}: {px}/{pn} coefficients but bases need {spec_xi.p}/{spec_nu.p}")
    source = meta.get("source", "mcmc")
    converged = data[:, 3].astype(bool) if source == "bootstrap" else None
    return PosteriorDraws(data[:, 4:4 + px], data[:, 4 + px:], data[:, 1], data[:, 2], spec_xi, spec_nu,
                          source=source, elapsed_hours=elapsed_hours, converged=converged)


def write_distribution(path, values, sector, config_hash):
    write_table(path, ["sector", "replicate", "value"],
                [[sector, i, v] for i, v in enumerate(values)], {"sector": sector, "config": config_hash})


def read_distribution(path):
    meta, columns, rows = read_table(path)
    if columns != ["sector", "replicate", "value"]:
        raise ContractError(f"{path}: expected columns sector,replicate,value")
    values = np.array([r[2] for r in rows], dtype=float)
    order = np.array([r[1] for r in rows], dtype=int)
    return meta.get("sector"), values[np.argsort(order, kind="stable")]
