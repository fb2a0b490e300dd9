"""Command line: ``nsextremes {simulate,fit,return-values,compare,ess,study}``.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical
failure, 4 I/O failure.
"""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io, pipeline
from .errors import ContractError, DomainError, NSExtremesError, NumericError

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("nsextremes")


def _config(args):
    overrides = {"seed": args.seed, "out": args.out, "workers": args.workers}
    for key in ("case", "method", "n", "sample"):
        if getattr(args, key, None) is not None:
            overrides[key] = getattr(args, key)
    if getattr(args, "basis", None) is not None:
        overrides["basis"] = args.basis
    if args.config:
        return io.load_config(args.config, overrides)
    return io.RunConfig.from_dict({k: v for k, v in overrides.items() if v is not None})


def _load_sample(cfg):
    if cfg.sample:
        return io.read_sample(cfg.sample)
    return pipeline.simulate(cfg)[1]


def cmd_simulate(args):
    cfg = _config(args)
    case, sample = pipeline.simulate(cfg)
    pipeline.save_sample(cfg.out, cfg, case, sample)
    print(f"wrote {len(sample)} events to {Path(cfg.out) / 'sample.csv'}")


def cmd_fit(args):
    cfg = _config(args)
    sample = _load_sample(cfg)
    draws, info = pipeline.fit(cfg, sample)
    pipeline.save_fit(cfg.out, cfg, draws, info)
    print(f"wrote {len(draws)} {draws.source} draws to {cfg.out}")


def cmd_return_values(args):
    if args.truth:
        cfg = _config(args)
        source = None
    else:
        if not args.run:
            raise ContractError("return-values needs --run DIR or --truth")
        cfg, source = pipeline.load_fit(args.run)
        if args.out:
            cfg.out = args.out
        if args.seed is not None:
            cfg.seed = args.seed
    if args.replicates is not None:
        cfg.return_values.replicates = args.replicates
    if args.factor is not None:
        cfg.return_values.factor = args.factor
    values = pipeline.return_values(cfg, source)
    pipeline.save_return_values(cfg.out, cfg, values)
    print(f"wrote {values.maxima.shape[0]} replicates per sector to {cfg.out}")


def cmd_compare(args):
    truth = pipeline.load_return_values(args.truth)
    records, rows = [], []
    for r, model_dir in enumerate(args.model):
        for sector, stat, value in pipeline.compare(truth, pipeline.load_return_values(model_dir)):
            rows.append([r, sector, stat, value])
            records.append({"sector": sector, "statistic": stat, "value": value})
    out = Path(args.out)
    digest = pipeline.combined_digest([pipeline.artifact_digest(d) for d in [args.truth, *args.model]])
    meta = {"config": digest, "realisations": len(args.model)}
    io.write_table(out / "stats.csv", ["realisation", "sector", "statistic", "value"], rows, meta)
    columns, box = pipeline.box_rows(records, ["sector", "statistic"])
    io.write_table(out / "box.csv", columns, box, meta)
    print(f"wrote comparison of {len(args.model)} realisation(s) to {out}")


def cmd_ess(args):
    cfg, draws = pipeline.load_fit(args.run)
    rows, per_hour = pipeline.ess_table(draws)
    out = Path(args.out or args.run)
    min_ess = float(min(r[1] for r in rows))
    io.write_table(out / "ess.csv", ["coordinate", "ess"], rows, {"config": cfg.digest()})
    io.write_yaml(out / "ess_summary.yaml", {"config": cfg.digest(), "min_ess": min_ess,
                                             "ess_per_hour": float(per_hour), "draws": len(draws)})
    print(f"min ESS {min_ess:.1f}, ESS/hour {per_hour:.4g}")


def cmd_study(args):
    from . import study

    cfg = study.load_study_config(args.config, seed=args.seed, out=args.out, workers=args.workers)
    result = study.run_study(cfg)
    print(f"study finished: {result.completed} cells, {len(result.failures)} failures, tables in {cfg.out}")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--seed", type=int, help="random seed (mandatory via flag or config)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--workers", type=int, help="worker processes")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="nsextremes", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate a sample from a synthetic case")
    p.add_argument("--case")
    p.add_argument("--n", type=int, help="fixed number of events (default: the case's expected total)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", parents=[common], help="fit a model by mle, mh or mmala")
    p.add_argument("--case")
    p.add_argument("--sample", help="sample file; otherwise simulate from --case")
    p.add_argument("--n", type=int)
    p.add_argument("--method", choices=io.METHODS)
    p.add_argument("--basis", help="basis kind used for both parameters")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("return-values", parents=[common], help="simulate return-value distributions")
    p.add_argument("--run", help="fit directory")
    p.add_argument("--truth", action="store_true", help="simulate under the configured case")
    p.add_argument("--case")
    p.add_argument("--replicates", type=int)
    p.add_argument("--factor", type=float)
    p.set_defaults(func=cmd_return_values)

    p = sub.add_parser("compare", parents=[common], help="compare model and truth return values")
    p.add_argument("--truth", required=True, help="directory of truth return values")
    p.add_argument("--model", required=True, nargs="+", help="one directory per realisation")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("ess", parents=[common], help="effective sample sizes of a fit")
    p.add_argument("--run", required=True)
    p.set_defaults(func=cmd_ess)

    p = sub.add_parser("study", parents=[common], help="run a case x basis x method grid")
    p.set_defaults(func=cmd_study)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "compare" and not args.out:
        print("error: compare needs --out", file=sys.stderr)
        return EXIT_USAGE
    try:
        with np.errstate(over="ignore"):
            args.func(args)
    except (NumericError, DomainError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ContractError, NSExtremesError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
