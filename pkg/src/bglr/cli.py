"""Command-line interface.

Subcommands: gld (distribution utilities), fit (single dataset), pipeline
(daily batch over regional counts), compare (DIC verdict between two fit
reports), simulate (synthetic data generation).  Every command is
deterministic given its config and seed; statistical non-convergence is
reported in the output files, not via the exit code.

Exit codes: 0 success, 1 numeric/data failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, diagnostics, gld, mcmc, pipeline
from .baselines import slr_fit
from .config import RunConfig, parse_config_file
from .pipeline import CsvFormatError, load_xy_csv
from .regression import ParamVector

__all__ = ["main", "build_parser", "RunConfig"]


def _common_flags(sub):
    sub.add_argument("--config", help="flat key = value config file")
    sub.add_argument("--seed", type=int, help="base RNG seed (overrides config)")
    sub.add_argument("--out", help="output directory or file")
    sub.add_argument("--threads", type=int, help="max parallel workers (0 = all cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bglr",
        description="Bayesian generalized logistic regression toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    g = subs.add_parser("gld", help="distribution utilities")
    g.add_argument("operation", choices=["pdf", "cdf", "quantile", "sample", "fit"])
    g.add_argument("--x", type=float, help="evaluation point (pdf/cdf)")
    g.add_argument("--prob", type=float, help="probability level (quantile)")
    g.add_argument("--theta", type=float, default=0.0)
    g.add_argument("--sigma", type=float, default=1.0)
    g.add_argument("--alpha", type=float, default=1.0)
    g.add_argument("--n", type=int, default=1000, help="sample size")
    g.add_argument("--data", help="CSV with an 'x' column (fit)")
    g.add_argument("--column", default="x", help="data column name (fit)")
    _common_flags(g)
    g.set_defaults(func=cmd_gld)

    f = subs.add_parser("fit", help="fit models to one dataset CSV")
    f.add_argument("--data", required=True, help="CSV with covariates and a 'y' column")
    f.add_argument("--iterations", type=int)
    f.add_argument("--burn-in", dest="burn_in", type=int)
    f.add_argument("--chains", type=int)
    f.add_argument("--models", help="comma list out of bglr,bnr,slr")
    f.add_argument("--rhat", action="store_true",
                   help="require the Gelman-Rubin report (needs >= 2 chains)")
    _common_flags(f)
    f.set_defaults(func=cmd_fit)

    p = subs.add_parser("pipeline", help="daily power-law batch pipeline")
    p.add_argument("--regions", required=True, help="Region,Population,Area CSV")
    p.add_argument("--cases", required=True, help="Region,Day1..DayN CSV")
    p.add_argument("--days", help="day range as START:END (1-based, inclusive)")
    p.add_argument("--iterations", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--chains", type=int)
    p.add_argument("--models", help="comma list out of bglr,bnr,slr")
    _common_flags(p)
    p.set_defaults(func=cmd_pipeline)

    c = subs.add_parser("compare", help="DIC verdict between two fit reports")
    c.add_argument("summary_a", help="summary JSON of the first model")
    c.add_argument("summary_b", help="summary JSON of the second model")
    _common_flags(c)
    c.set_defaults(func=cmd_compare)

    s = subs.add_parser("simulate", help="generate synthetic data")
    s.add_argument("--kind", choices=["dataset", "corpus"], default="dataset")
    s.add_argument("--n", type=int, default=337, help="points per dataset")
    s.add_argument("--x-min", type=float, default=0.0)
    s.add_argument("--x-max", type=float, default=4.0)
    s.add_argument("--beta0", type=float, default=2.0)
    s.add_argument("--beta1", type=float, default=0.5)
    s.add_argument("--bp0", type=float, default=-1.0)
    s.add_argument("--bp1", type=float, default=0.3)
    s.add_argument("--alpha", type=float, default=2.0)
    s.add_argument("--regions", type=int, default=50, help="corpus region count")
    s.add_argument("--days", type=int, default=10, help="corpus day count")
    s.add_argument("--alpha2", type=float,
                   help="corpus: shape value after --switch-day")
    s.add_argument("--switch-day", type=int,
                   help="corpus: first day using --alpha2")
    s.add_argument("--zero-day", type=int, action="append", default=[],
                   help="corpus: force this day to all-zero (repeatable)")
    _common_flags(s)
    s.set_defaults(func=cmd_simulate)
    return parser


def _build_config(args, parser=None) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(parse_config_file(args.config))
    for key in ("iterations", "burn_in", "chains", "seed", "threads", "models"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    if getattr(args, "days", None):
        try:
            start, end = (int(t) for t in args.days.split(":"))
        except ValueError:
            raise ValueError(f"--days must be START:END, got {args.days!r}") from None
        values["day_start"], values["day_end"] = start, end
    return RunConfig(**values)


def _fmt(v: float) -> str:
    return repr(float(v))


def cmd_gld(args) -> int:
    params = gld.GldParams(theta=args.theta, sigma=args.sigma, alpha=args.alpha)
    op = args.operation
    if op in ("pdf", "cdf"):
        if args.x is None:
            raise ValueError(f"gld {op} requires --x")
        fn = gld.pdf if op == "pdf" else gld.cdf
        print(_fmt(fn(args.x, params)))
        return 0
    if op == "quantile":
        if args.prob is None:
            raise ValueError("gld quantile requires --prob")
        print(_fmt(gld.quantile(args.prob, params)))
        return 0
    if op == "sample":
        seed = args.seed if args.seed is not None else 0
        draws = gld.sample(params, args.n, seed=seed)
        lines = ["x"] + [_fmt(v) for v in draws]
        text = "\n".join(lines) + "\n"
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return 0
    # fit
    if not args.data:
        raise ValueError("gld fit requires --data")
    data = _read_column(args.data, args.column)
    fit, status = gld.mle_fit(data)
    if status.collapse is not gld.CollapseKind.NONE:
        print(f"MLE collapse: {status.collapse.value} after "
              f"{status.iterations} iterations", file=sys.stderr)
        return 1
    print(f"theta={_fmt(fit.theta)} sigma={_fmt(fit.sigma)} "
          f"alpha={_fmt(fit.alpha)} converged={status.converged} "
          f"loglik={_fmt(status.final_log_likelihood)}")
    return 0


def _read_column(path, column) -> np.ndarray:
    import csv

    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CsvFormatError(f"{path}: file is empty")
    header = [c.strip() for c in rows[0]]
    if column not in header:
        raise CsvFormatError(f"{path}: no column named {column!r}")
    idx = header.index(column)
    try:
        return np.array([float(r[idx]) for r in rows[1:]])
    except (ValueError, IndexError):
        raise CsvFormatError(f"{path}: column {column!r} has non-numeric cells") from None


def _summary_payload(fit: pipeline.FitResult, ds, config: RunConfig, seed: int) -> dict:
    # per-observation scale (variance for the normal baseline) at the
    # plug-in point, for downstream per-unit spread analysis
    point = fit.dic.plug_in_psi
    bp = np.array([point[f"bp{j}"] for j in range(ds.p)])
    scale = np.exp(ds.design @ bp)
    payload = {
        "model": fit.model,
        "dataset_digest": ds.digest(),
        "config_digest": fit.chains[0].config_digest,
        "seed": seed,
        "n_draws": fit.summary.n_draws,
        "converged": fit.converged,
        "summary": fit.summary.to_dict(),
        "rhat": fit.rhat.to_dict() if fit.rhat is not None else None,
        "dic": {"dic": fit.dic.dic, "p_dic": fit.dic.p_dic,
                "plug_in": fit.dic.plug_in_psi},
        "acceptance": {k: float(v) for k, v in
                       fit.chains[0].acceptance_rate_by_block.items()},
        "scale_at_plug_in": [float(s) for s in scale],
    }
    return payload


def cmd_fit(args) -> int:
    config = _build_config(args)
    if args.rhat and config.chains < 2:
        raise UsageError("--rhat requires at least 2 chains")
    ds = load_xy_csv(args.data)
    out_dir = args.out or "out"
    os.makedirs(out_dir, exist_ok=True)
    verdicts = []

    if "slr" in config.models:
        fit = slr_fit(ds)
        payload = {
            "model": "slr",
            "dataset_digest": ds.digest(),
            "beta": [float(v) for v in fit.beta],
            "standard_errors": [float(v) for v in fit.standard_errors],
            "residual_variance": fit.residual_variance,
        }
        _write_json(os.path.join(out_dir, "slr_summary.json"), payload)
        verdicts.append(f"slr: beta={[round(float(b), 4) for b in fit.beta]}")

    for model in ("bglr", "bnr"):
        if model not in config.models:
            continue
        seed = config.seed + (0 if model == "bglr" else 500)
        result = pipeline.fit_bayesian(
            ds, model, config.prior(), config.proposal(2 * ds.p),
            config.iterations, config.burn_in, config.chains, seed)
        for k, chain in enumerate(result.chains):
            mcmc.write_chain_csv(
                chain, os.path.join(out_dir, f"{model}_chain{k}.csv"))
        _write_json(os.path.join(out_dir, f"{model}_summary.json"),
                    _summary_payload(result, ds, config, seed))
        diagnostics.write_summary_csv(
            result.summary, os.path.join(out_dir, f"{model}_summary.csv"),
            rhat=result.rhat)
        max_rhat = (max(result.rhat.to_dict().values())
                    if result.rhat is not None else float("nan"))
        verdicts.append(
            f"{model}: converged={result.converged} max_rhat={max_rhat:.4f} "
            f"dic={result.dic.dic:.2f}")
    print("; ".join(verdicts))
    return 0


def cmd_pipeline(args) -> int:
    config = _build_config(args)
    regions = pipeline.load_regions(args.regions, args.cases)
    records = pipeline.fit_all_days(regions, config)
    out_dir = args.out or "out"
    os.makedirs(out_dir, exist_ok=True)
    pipeline.export_time_series(records, os.path.join(out_dir, "timeseries.csv"))
    pipeline.write_manifest(os.path.join(out_dir, "manifest.json"), config,
                            records, n_regions=len(regions),
                            software_version=__version__)
    n_failed = sum(bool(r.failures) for r in records)
    print(f"pipeline: {len(records)} days fitted, {n_failed} with failures; "
          f"outputs in {out_dir}")
    return 0


def cmd_compare(args) -> int:
    with open(args.summary_a) as fh:
        a = json.load(fh)
    with open(args.summary_b) as fh:
        b = json.load(fh)
    for payload, path in ((a, args.summary_a), (b, args.summary_b)):
        if "dic" not in payload or "dataset_digest" not in payload:
            raise ValueError(f"{path}: not a Bayesian fit summary (no DIC)")
    if a["dataset_digest"] != b["dataset_digest"]:
        raise ValueError("summaries refer to different datasets (digest mismatch)")
    diff = a["dic"]["dic"] - b["dic"]["dic"]
    if diff == 0.0:
        verdict = "no preference"
    else:
        verdict = f"preferred={a['model'] if diff < 0 else b['model']}"
    print(f"dic_difference={_fmt(diff)} ({a['model']} - {b['model']}); {verdict}")
    return 0


def cmd_simulate(args) -> int:
    seed = args.seed if args.seed is not None else 0
    psi = ParamVector(beta=[args.beta0, args.beta1],
                      beta_prime=[args.bp0, args.bp1], alpha=args.alpha)
    if args.kind == "dataset":
        rng = np.random.default_rng(seed)
        x = rng.uniform(args.x_min, args.x_max, args.n)
        day = pipeline.simulate_day(psi, x, seed=seed + 1)
        out = args.out or "dataset.csv"
        with open(out, "w") as fh:
            fh.write("x,y\n")
            for xi, yi in zip(day.dataset.design[:, 1], day.dataset.response):
                fh.write(f"{_fmt(xi)},{_fmt(yi)}\n")
        print(f"wrote {args.n} points to {out} "
              f"(true beta=({args.beta0},{args.beta1}) "
              f"beta'=({args.bp0},{args.bp1}) alpha={args.alpha} seed={seed})")
        return 0
    # corpus
    psis = []
    for d in range(1, args.days + 1):
        alpha = args.alpha
        if args.alpha2 is not None and args.switch_day is not None and d >= args.switch_day:
            alpha = args.alpha2
        psis.append(ParamVector(beta=[args.beta0, args.beta1],
                                beta_prime=[args.bp0, args.bp1], alpha=alpha))
    records = pipeline.simulate_corpus(args.regions, psis, seed=seed,
                                       zero_days=set(args.zero_day))
    out_dir = args.out or "corpus"
    os.makedirs(out_dir, exist_ok=True)
    regions_path = os.path.join(out_dir, "Regions.csv")
    cases_path = os.path.join(out_dir, "Cases.csv")
    pipeline.write_corpus(records, regions_path, cases_path)
    print(f"wrote {args.regions} regions x {args.days} days to {out_dir}")
    return 0


class UsageError(Exception):
    pass


def _write_json(path, payload: dict):
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits with code 2
    except (CsvFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
