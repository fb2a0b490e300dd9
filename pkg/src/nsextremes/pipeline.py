"""End-to-end steps shared by the command line and the study harness.

Each ``save_*`` function writes one artifact directory. Results that
must be byte-identical across reruns are kept apart from wall-clock
timing, which goes to ``timing.yaml`` only.
"""

import hashlib
from pathlib import Path

import numpy as np

from . import io, mcmc, metrics, mle, retval
from .cases import case_from_config, simulate_sample, truth_curves
from .errors import ContractError

CURVE_GRID = np.arange(360.0)
CURVE_QUANTILES = (0.025, 0.5, 0.975)
BOX_QUANTILES = (0.025, 0.25, 0.5, 0.75, 0.975)
STATISTICS = ("ks", "cvm", "kl", "q375_diff")


def _qlabel(q):
    return f"q{int(round(q * 1000)):03d}"


def sample_size(cfg, case):
    """Fixed event count for ``cfg`` (``None`` means Poisson)."""
    if cfg.n == "poisson":
        return None
    return int(round(case.expected_total)) if cfg.n is None else int(cfg.n)


def simulate(cfg, seed=None):
    case = case_from_config(cfg.case)
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    return case, simulate_sample(case, rng, fixed_n=sample_size(cfg, case))


def save_sample(out, cfg, case, sample, seed=None):
    out = Path(out)
    digest = cfg.digest()
    io.write_sample(out / "sample.csv", sample, case.label, cfg.seed if seed is None else seed, digest)
    rho, xi, sigma = truth_curves(case, CURVE_GRID)
    io.write_table(out / "truth.csv", ["theta", "rho", "xi", "sigma"],
                   zip(CURVE_GRID, rho, xi, sigma), {"case": case.label, "config": digest})


def fit(cfg, sample, seed=None):
    """Run the configured inference. Returns ``(draws, info)``; ``info`` is YAML-ready."""
    seed = cfg.seed if seed is None else seed
    if cfg.method == "mle":
        c = cfg.mle
        cv, res, draws = mle.fit_mle(sample, cfg.basis_xi, cfg.basis_nu, np.asarray(c.grid_xi),
                                     np.asarray(c.grid_nu), c.k, c.m_bs, np.random.default_rng(seed),
                                     workers=cfg.workers)
        info = {"method": "mle", "lambda_xi": cv.lambda_xi, "lambda_nu": cv.lambda_nu,
                "penalised_nll": res.penalised_nll, "irls_iterations": res.iterations,
                "irls_converged": bool(res.converged), "bootstrap_converged": int(draws.usable().size),
                "cv_failures": len(cv.failures),
                "cv": [[float(a), float(b), float(cv.scores[i, j])] for i, a in enumerate(cv.grid_xi)
                       for j, b in enumerate(cv.grid_nu)]}
        return draws, info
    draws = mcmc.run_chain(sample, cfg.basis_xi, cfg.basis_nu, cfg.chain_config(seed))
    info = {"method": cfg.method, "acceptance": {k: float(v) for k, v in draws.acceptance_rates().items()},
            "step_xi": float(draws.traces["step_xi"][-1]), "step_nu": float(draws.traces["step_nu"][-1])}
    return draws, info


def curve_rows(draws, angles=CURVE_GRID):
    """Pointwise 2.5/50/97.5 percentiles of shape and scale on the angle grid."""
    xi, sigma = draws.curves(angles, draws.usable())
    qx = np.quantile(xi, CURVE_QUANTILES, axis=0)
    qs = np.quantile(sigma, CURVE_QUANTILES, axis=0)
    columns = (["theta"] + [f"xi_{_qlabel(q)}" for q in CURVE_QUANTILES]
               + [f"sigma_{_qlabel(q)}" for q in CURVE_QUANTILES])
    return columns, np.column_stack([angles, qx.T, qs.T])


def save_fit(out, cfg, draws, info):
    out = Path(out)
    digest = cfg.digest()
    io.write_yaml(out / "config.yaml", cfg.to_dict())
    io.write_draws(out / "draws.csv", draws, digest)
    columns, rows = curve_rows(draws)
    io.write_table(out / "curves.csv", columns, rows, {"config": digest})
    info = dict(info)
    cv = info.pop("cv", None)
    if cv is not None:
        io.write_table(out / "cv.csv", ["lambda_xi", "lambda_nu", "score"], cv, {"config": digest})
    if draws.traces:
        names = sorted(draws.traces)
        rows = zip(range(len(draws)), *(draws.traces[k] for k in names))
        io.write_table(out / "traces.csv", ["index"] + names, rows, {"config": digest})
    info.update({"config": digest, "n_draws": len(draws), "source": draws.source})
    io.write_yaml(out / "summary.yaml", info)
    io.write_yaml(out / "timing.yaml", {"elapsed_hours": float(draws.elapsed_hours), "config": digest})


def load_fit(run_dir):
    """Returns ``(cfg, draws)`` from a directory written by :func:`save_fit`."""
    run_dir = Path(run_dir)
    for name in ("config.yaml", "draws.csv"):
        if not (run_dir / name).exists():
            raise FileNotFoundError(f"run artifact missing {run_dir / name}")
    cfg = io.RunConfig.from_dict(io.read_yaml(run_dir / "config.yaml"))
    hours = 1e-12
    if (run_dir / "timing.yaml").exists():
        hours = float(io.read_yaml(run_dir / "timing.yaml")["elapsed_hours"])
    return cfg, io.read_draws(run_dir / "draws.csv", cfg.basis_xi, cfg.basis_nu, hours)


def return_values(cfg, source, replicates=None, seed=None):
    case = case_from_config(cfg.case)
    rv = cfg.return_values
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    return retval.simulate_return_distribution(source if source is not None else case, case, rv.factor,
                                               replicates or rv.replicates, rng, cfg.workers)


def save_return_values(out, cfg, values, q=None):
    out = Path(out)
    digest = cfg.digest()
    q = cfg.return_values.q if q is None else q
    rows = []
    for name, dist in values.distributions().items():
        io.write_distribution(out / f"rv_{name}.csv", dist_values_in_order(values, name), name, digest)
        rows.append([name, dist.replicates, retval.percentile(dist, q), float(np.mean(dist.values == 0))])
    io.write_table(out / "percentiles.csv", ["sector", "replicates", _qlabel(q), "atom_at_zero"], rows,
                   {"q": q, "config": digest})


def dist_values_in_order(values, sector):
    return values.maxima[:, values.sectors.all_names.index(sector)]


def load_return_values(directory):
    directory = Path(directory)
    out = {}
    for name in retval.OCTANTS.all_names:
        path = directory / f"rv_{name}.csv"
        if not path.exists():
            raise FileNotFoundError(f"missing return-value file {path}")
        _, vals = io.read_distribution(path)
        out[name] = retval.EmpiricalDistribution(vals, name)
    return out


def artifact_digest(directory):
    """Config hash recorded in a return-value directory."""
    meta, _, _ = io.read_table(Path(directory) / "percentiles.csv")
    return meta.get("config", "unknown")


def combined_digest(parts):
    return hashlib.sha256("|".join(map(str, parts)).encode()).hexdigest()[:12]


def compare(truth, model, q=0.375, grid_size=1000):
    """Per-sector statistics between two ``{sector: EmpiricalDistribution}`` maps."""
    if set(truth) != set(model):
        raise ContractError(f"sector mismatch: {sorted(set(truth) ^ set(model))}")
    rows = []
    for name in retval.OCTANTS.all_names:
        if name not in truth:
            continue
        t, m = truth[name], model[name]
        stats = {"ks": metrics.ks_distance(t, m), "cvm": metrics.cvm_distance(t, m),
                 "kl": metrics.kl_divergence(t, m, grid_size),
                 "q375_diff": retval.percentile(m, q) - retval.percentile(t, q)}
        rows += [[name, s, stats[s]] for s in STATISTICS]
    return rows


def box_rows(records, keys):
    """Median, quartiles and 2.5/97.5 percentiles of ``value`` grouped by ``keys``.

    ``records`` are dicts; grouping output is sorted, so the result does
    not depend on the order realisations were produced in.
    """
    groups = {}
    for rec in records:
        groups.setdefault(tuple(rec[k] for k in keys), []).append(float(rec["value"]))
    rows = []
    for key in sorted(groups):
        vals = np.sort(np.asarray(groups[key]))
        rows.append([*key, vals.size, *np.quantile(vals, BOX_QUANTILES)])
    return list(keys) + ["n"] + [_qlabel(q) for q in BOX_QUANTILES], rows


def ess_table(draws):
    mon = draws.monitored()
    names = ([f"beta_xi_{j}" for j in range(draws.beta_xi.shape[1])]
             + [f"beta_nu_{j}" for j in range(draws.beta_nu.shape[1])] + ["lambda_xi", "lambda_nu"])
    if len(draws) < metrics.MIN_CHAIN:
        raise ContractError(f"ESS needs at least {metrics.MIN_CHAIN} draws")
    rows = [[n, metrics.effective_sample_size(mon[:, j]) if draws.source == "mcmc" else float(draws.usable().size)]
            for j, n in enumerate(names)]
    return rows, metrics.ess_per_hour(draws)
