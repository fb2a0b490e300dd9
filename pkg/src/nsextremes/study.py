"""Desk-scale comparison study over cases, parameterisations and inference methods.

Every (case, basis, method, realisation) cell lives in
``out/<case>/<basis>/<method>/<realisation>/`` and is finished when its
``stats.csv`` exists, so an interrupted study resumes where it stopped.
Truth return values are simulated once per case under ``out/<case>/truth``.
"""

import json
import logging
import zlib
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np
import yaml

from . import io, pipeline
from ._parallel import ordered_map
from .errors import ContractError

log = logging.getLogger(__name__)

TRUTH_REPLICATES = 10_000


def _label_seed(*parts):
    """Stable integer seed from a base seed and a tuple of labels or indices."""
    words = [zlib.crc32(str(p).encode()) for p in parts]
    return int(np.random.SeedSequence(words).generate_state(1, np.uint64)[0] >> 1)


@dataclass
class StudyConfig:
    seed: int
    cases: list = field(default_factory=lambda: ["case1", "case2", "case3"])
    bases: list = field(default_factory=lambda: ["spline", "constant"])
    methods: list = field(default_factory=lambda: ["mmala", "mle"])
    realisations: int = 5
    n: int | str | None = None
    truth_replicates: int = TRUTH_REPLICATES
    mcmc: dict = field(default_factory=dict)
    mle: dict = field(default_factory=dict)
    return_values: dict = field(default_factory=dict)
    out: str = "study_out"
    workers: int = 1

    def __post_init__(self):
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)):
            raise io.ConfigError("study seed is mandatory and must be an integer")
        if int(self.realisations) < 1:
            raise io.ConfigError("realisations must be >= 1")
        if self.truth_replicates < 1:
            raise io.ConfigError("truth_replicates must be >= 1")
        for basis in self.bases:
            io.parse_basis(basis)
        labels = [basis_label(b) for b in self.bases]
        if len(set(labels)) != len(labels):
            raise io.ConfigError(f"basis labels must be unique: {labels}")
        for method in self.methods:
            if method not in io.METHODS:
                raise io.ConfigError(f"unknown method {method!r}")

    def digest(self):
        data = {k: getattr(self, k) for k in StudyConfig.__dataclass_fields__ if k not in ("out", "workers")}
        return pipeline.combined_digest([json.dumps(data, sort_keys=True, default=str)])

    def run_config(self, case, basis, method, seed):
        data = {"seed": int(seed), "case": case, "n": self.n, "method": method,
                "basis": {k: v for k, v in basis.items() if k != "label"} if isinstance(basis, dict) else basis,
                "mcmc": dict(self.mcmc), "mle": dict(self.mle), "return_values": dict(self.return_values)}
        return io.RunConfig.from_dict(data)


def basis_label(basis):
    if isinstance(basis, dict) and "label" in basis:
        return str(basis["label"])
    spec = io.parse_basis({k: v for k, v in basis.items() if k != "label"} if isinstance(basis, dict) else basis)
    return spec.kind if spec == io.parse_basis(spec.kind) else f"{spec.kind}_p{spec.p}"


def case_label(case):
    return case if isinstance(case, str) else str(case.get("label", "custom"))


def load_study_config(path, seed=None, out=None, workers=None):
    if path is None:
        raise ContractError("study needs --config")
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    for key, value in (("seed", seed), ("out", out), ("workers", workers)):
        if value is not None:
            data[key] = value
    unknown = set(data) - set(StudyConfig.__dataclass_fields__)
    if unknown:
        raise io.ConfigError(f"unknown study keys: {sorted(unknown)}")
    if "seed" not in data:
        raise io.ConfigError("seed is mandatory")
    return StudyConfig(**data)


@dataclass
class StudyResult:
    records: list
    ess: list
    failures: list
    completed: int


def _truth_dir(cfg, case):
    return Path(cfg.out) / case_label(case) / "truth"


def ensure_truth(cfg, case):
    """Truth return values for ``case`` (computed once, then reused)."""
    directory = _truth_dir(cfg, case)
    if not (directory / "percentiles.csv").exists():
        run = cfg.run_config(case, "constant", "mle", _label_seed(cfg.seed, case_label(case), "truth"))
        values = pipeline.return_values(run, None, replicates=cfg.truth_replicates)
        pipeline.save_return_values(directory, run, values)
    return pipeline.load_return_values(directory)


def _read_stats(path):
    _, _, rows = io.read_table(path)
    return [(sector, stat, float(value)) for sector, stat, value in rows]


def run_cell(job, cfg):
    """One realisation of one (case, basis, method). Returns ``(stats, ess_row, error)``."""
    case, basis, method, r = job
    clabel, blabel = case_label(case), basis_label(basis)
    cell = Path(cfg.out) / clabel / blabel / method / str(r)
    stats_path = cell / "stats.csv"
    try:
        if not stats_path.exists():
            sample_seed = _label_seed(cfg.seed, clabel, r, "sample")
            fit_seed = _label_seed(cfg.seed, clabel, blabel, method, r, "fit")
            run = cfg.run_config(case, basis, method, fit_seed)
            case_spec, sample = pipeline.simulate(run, seed=sample_seed)
            pipeline.save_sample(cell, run, case_spec, sample, seed=sample_seed)
            draws, info = pipeline.fit(run, sample)
            pipeline.save_fit(cell, run, draws, info)
            ess_rows, _ = pipeline.ess_table(draws)
            io.write_table(cell / "ess.csv", ["coordinate", "ess"], ess_rows, {"config": run.digest()})
            values = pipeline.return_values(run, draws)
            pipeline.save_return_values(cell, run, values)
            rows = pipeline.compare(pipeline.load_return_values(_truth_dir(cfg, case)),
                                    values.distributions(), q=run.return_values.q)
            io.write_table(stats_path, ["sector", "statistic", "value"], rows, {"config": run.digest()})
        stats = _read_stats(stats_path)
        _, _, ess_rows = io.read_table(cell / "ess.csv")
        hours = float(io.read_yaml(cell / "timing.yaml")["elapsed_hours"])
        min_ess = min(float(e) for _, e in ess_rows)
        return stats, (clabel, blabel, method, r, min_ess, min_ess / hours), None
    except Exception as exc:  # one bad cell must not stop the study
        log.warning("cell %s failed: %s", cell, exc)
        return None, None, f"{type(exc).__name__}: {exc}"


def run_study(cfg):
    """Run every cell, then write ``box.csv``, ``ess.csv``, ``ess_box.csv`` and ``failures.csv``."""
    out = Path(cfg.out)
    io.write_yaml(out / "study.yaml", {k: getattr(cfg, k) for k in StudyConfig.__dataclass_fields__})
    for case in cfg.cases:
        ensure_truth(cfg, case)
    jobs = [(case, basis, method, r) for case in cfg.cases for basis in cfg.bases
            for method in cfg.methods for r in range(int(cfg.realisations))]
    results = ordered_map(partial(run_cell, cfg=cfg), jobs, cfg.workers)

    records, ess, failures = [], [], []
    for (case, basis, method, r), (stats, ess_row, error) in zip(jobs, results):
        key = {"case": case_label(case), "basis": basis_label(basis), "method": method}
        if error:
            failures.append([key["case"], key["basis"], method, r, error.replace(",", ";")])
            continue
        records += [dict(key, realisation=r, sector=s, statistic=st, value=v) for s, st, v in stats]
        ess.append(ess_row)
    meta = {"config": cfg.digest(), "seed": cfg.seed, "realisations": cfg.realisations}
    columns, rows = pipeline.box_rows(records, ["case", "basis", "method", "sector", "statistic"])
    io.write_table(out / "box.csv", columns, rows, meta)
    ess_cols = ["case", "basis", "method", "realisation", "min_ess", "ess_per_hour"]
    io.write_table(out / "ess.csv", ess_cols, sorted(ess), meta)
    ess_records = ([dict(zip(ess_cols, e), statistic="min_ess", value=e[4]) for e in ess]
                   + [dict(zip(ess_cols, e), statistic="ess_per_hour", value=e[5]) for e in ess])
    columns, rows = pipeline.box_rows(ess_records, ["case", "basis", "method", "statistic"])
    io.write_table(out / "ess_box.csv", columns, rows, meta)
    io.write_table(out / "failures.csv", ["case", "basis", "method", "realisation", "error"], failures, meta)
    return StudyResult(records, ess, failures, len(jobs) - len(failures))
