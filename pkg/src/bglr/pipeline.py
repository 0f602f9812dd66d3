"""Daily power-law scaling workflow over regional count data.

Each region contributes one point per day: x = log10(population / area)
and y = log10(cases / area).  Regions reporting zero cases on a day have
no defined log density and are excluded (and counted).  Every included
day is fitted with the selected models on the same dataset and the
parameter estimates are exported as a time series.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics, mcmc
from .baselines import SlrFit, bnr_draw_loglik, slr_fit
from .config import RunConfig
from .diagnostics import DicResult, PosteriorSummary, RhatReport
from .mcmc import ChainInitError
from .regression import Dataset, ParamVector, _loglik_raw

__all__ = [
    "RegionRecord",
    "DayDataset",
    "DayFitRecord",
    "FitResult",
    "CsvFormatError",
    "load_regions",
    "load_xy_csv",
    "build_day_dataset",
    "simulate_day",
    "simulate_corpus",
    "write_corpus",
    "bglr_draw_loglik",
    "fit_bayesian",
    "fit_day",
    "fit_all_days",
    "export_time_series",
    "write_manifest",
    "TIME_SERIES_COLUMNS",
]

# a day needs at least p + 2 points to be worth fitting (p = 2 here)
MIN_POINTS_PER_DAY = 4

_MODEL_PARAMS = {
    "bglr": ("b0", "b1", "bp0", "bp1", "alpha"),
    "bnr": ("b0", "b1", "bp0", "bp1"),
}
_STATS = ("mean", "median", "sd", "q025", "q975")


class CsvFormatError(ValueError):
    """Malformed input file; the message carries the row/column location."""


@dataclass
class RegionRecord:
    region: str
    population: int
    area_hectares: float
    daily_cases: np.ndarray

    def __post_init__(self):
        self.daily_cases = np.asarray(self.daily_cases, dtype=np.int64)
        if self.population <= 0:
            raise ValueError(f"region {self.region!r}: population must be > 0")
        if not self.area_hectares > 0.0:
            raise ValueError(f"region {self.region!r}: area must be > 0")
        if np.any(self.daily_cases < 0):
            raise ValueError(f"region {self.region!r}: case counts must be >= 0")


@dataclass
class DayDataset:
    """One day's regression dataset in log-density space."""

    day_index: int
    dataset: Dataset | None
    n_included: int
    n_excluded_zero: int
    provenance: dict = field(default_factory=dict)

    @property
    def fittable(self) -> bool:
        return self.dataset is not None


@dataclass
class FitResult:
    """One Bayesian model's chains plus derived diagnostics."""

    model: str
    chains: list
    summary: PosteriorSummary
    rhat: RhatReport | None
    dic: DicResult

    @property
    def converged(self) -> bool:
        return self.rhat.converged if self.rhat is not None else True


@dataclass
class DayFitRecord:
    """Everything fitted (or failed) for one day; nothing is dropped."""

    day_index: int
    n_included: int
    n_excluded_zero: int
    fittable: bool
    slr: SlrFit | None = None
    model_summaries: dict = field(default_factory=dict)  # model -> {param -> stats}
    model_rhat: dict = field(default_factory=dict)       # model -> {param -> rhat}
    model_converged: dict = field(default_factory=dict)  # model -> bool
    model_dic: dict = field(default_factory=dict)        # model -> {dic, p_dic}
    failures: dict = field(default_factory=dict)         # model -> reason
    dic_difference: float | None = None
    delta_b0: float | None = None
    delta_b1: float | None = None


def _parse_number(raw: str, kind, path, row, col):
    try:
        value = kind(raw)
    except ValueError:
        raise CsvFormatError(
            f"{path}: row {row}, column {col!r}: non-numeric value {raw!r}"
        ) from None
    return value


def load_regions(regions_path, cases_path) -> list:
    """Read the regions file (Region,Population,Area) and the daily cases
    file (Region,Day1,...,DayN) and join them on region name."""
    with open(regions_path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CsvFormatError(f"{regions_path}: file is empty")
    header = [c.strip() for c in rows[0]]
    if header != ["Region", "Population", "Area"]:
        raise CsvFormatError(
            f"{regions_path}: row 1: expected header Region,Population,Area, "
            f"got {','.join(header)}"
        )
    meta = {}
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise CsvFormatError(f"{regions_path}: row {i}: expected 3 cells")
        name = row[0].strip()
        if not name:
            raise CsvFormatError(f"{regions_path}: row {i}, column 'Region': empty")
        if name in meta:
            raise CsvFormatError(f"{regions_path}: row {i}: duplicate region {name!r}")
        pop = _parse_number(row[1].strip(), int, regions_path, i, "Population")
        area = _parse_number(row[2].strip(), float, regions_path, i, "Area")
        meta[name] = (pop, area)
    if not meta:
        raise CsvFormatError(f"{regions_path}: no region rows")

    with open(cases_path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CsvFormatError(f"{cases_path}: file is empty")
    header = [c.strip() for c in rows[0]]
    n_days = len(header) - 1
    expected = ["Region"] + [f"Day{k}" for k in range(1, n_days + 1)]
    if n_days < 1 or header != expected:
        raise CsvFormatError(
            f"{cases_path}: row 1: expected header Region,Day1,...,DayN"
        )
    cases = {}
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != n_days + 1:
            raise CsvFormatError(
                f"{cases_path}: row {i}: expected {n_days + 1} cells, got {len(row)}"
            )
        name = row[0].strip()
        if name in cases:
            raise CsvFormatError(f"{cases_path}: row {i}: duplicate region {name!r}")
        vals = [
            _parse_number(cell.strip(), int, cases_path, i, f"Day{j}")
            for j, cell in enumerate(row[1:], start=1)
        ]
        cases[name] = vals

    missing = sorted(set(meta) - set(cases))
    extra = sorted(set(cases) - set(meta))
    if missing or extra:
        raise CsvFormatError(
            f"{cases_path}: region names do not match {regions_path} "
            f"(missing: {missing[:5]}, extra: {extra[:5]})"
        )
    records = []
    for name in meta:  # file order of the regions file
        pop, area = meta[name]
        try:
            records.append(RegionRecord(name, pop, area, np.array(cases[name])))
        except ValueError as exc:
            raise CsvFormatError(f"{regions_path}: {exc}") from None
    return records


def load_xy_csv(path) -> Dataset:
    """Read a generic regression CSV: a 'y' column plus covariate columns.

    An intercept column is prepended automatically.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise CsvFormatError(f"{path}: need a header plus at least one row")
    header = [c.strip() for c in rows[0]]
    if "y" not in header:
        raise CsvFormatError(f"{path}: header must contain a 'y' column")
    y_idx = header.index("y")
    data = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise CsvFormatError(f"{path}: row {i}: wrong cell count")
        data.append([_parse_number(c.strip(), float, path, i, header[j])
                     for j, c in enumerate(row)])
    arr = np.asarray(data, dtype=float)
    y = arr[:, y_idx]
    covs = np.delete(arr, y_idx, axis=1)
    design = np.column_stack([np.ones(len(y)), covs])
    return Dataset(design=design, response=y)


def build_day_dataset(regions, day_index: int) -> DayDataset:
    """Log-density dataset for one (1-based) day column.

    Zero-case regions are excluded and counted; days with fewer than
    MIN_POINTS_PER_DAY usable points (or a degenerate design) are marked
    unfittable rather than raising.
    """
    n_days = regions[0].daily_cases.size
    if not 1 <= day_index <= n_days:
        raise ValueError(f"day_index must be in [1, {n_days}], got {day_index}")
    xs, ys = [], []
    n_excluded = 0
    for rec in regions:
        c = int(rec.daily_cases[day_index - 1])
        if c <= 0:
            n_excluded += 1
            continue
        xs.append(math.log10(rec.population / rec.area_hectares))
        ys.append(math.log10(c / rec.area_hectares))
    n_inc = len(xs)
    provenance = {"day_index": day_index}
    if n_inc < MIN_POINTS_PER_DAY:
        provenance["unfittable_reason"] = (
            f"only {n_inc} regions with cases (need {MIN_POINTS_PER_DAY})")
        return DayDataset(day_index, None, n_inc, n_excluded, provenance)
    x = np.asarray(xs)
    try:
        ds = Dataset(design=np.column_stack([np.ones(n_inc), x]),
                     response=np.asarray(ys))
    except ValueError as exc:
        provenance["unfittable_reason"] = str(exc)
        return DayDataset(day_index, None, n_inc, n_excluded, provenance)
    return DayDataset(day_index, ds, n_inc, n_excluded, provenance)


def simulate_day(true_psi: ParamVector, x_values, seed: int,
                 day_index: int = 0) -> DayDataset:
    """Synthetic day drawn from the generalized logistic regression model.

    y_i ~ GLD(theta_i = x_i'beta, sigma_i = exp(x_i'beta'), alpha); the
    generating parameters and seed travel in the provenance metadata.
    """
    x = np.asarray(x_values, dtype=float)
    design = np.column_stack([np.ones(x.size), x])
    theta = design @ true_psi.beta
    sigma = np.exp(design @ true_psi.beta_prime)
    rng = np.random.default_rng(seed)
    u = np.clip(rng.random(x.size), 1e-300, 1.0 - 1e-16)
    y = theta - sigma * np.log(np.expm1(-np.log(u) / true_psi.alpha))
    ds = Dataset(design=design, response=y)
    prov = {
        "true_beta": [float(v) for v in true_psi.beta],
        "true_beta_prime": [float(v) for v in true_psi.beta_prime],
        "true_alpha": float(true_psi.alpha),
        "seed": int(seed),
    }
    return DayDataset(day_index, ds, x.size, 0, prov)


def simulate_corpus(n_regions: int, day_psis, seed: int, zero_days=()) -> list:
    """Synthetic regional corpus whose daily log-density regression follows
    the given per-day parameters.

    Populations and areas are drawn once; each day's cases are
    round(area * 10^y) with y from the regression model, so small
    implied densities naturally produce zero-case (excluded) regions.
    Days listed in zero_days (1-based) are forced to all-zero.
    """
    rng = np.random.default_rng(seed)
    pops = np.exp(rng.uniform(math.log(2e4), math.log(1.5e6), n_regions))
    areas = np.exp(rng.uniform(math.log(1e3), math.log(3e5), n_regions))
    pops = pops.astype(np.int64)
    x = np.log10(pops / areas)
    n_days = len(day_psis)
    all_cases = np.zeros((n_regions, n_days), dtype=np.int64)
    for d, psi in enumerate(day_psis, start=1):
        if d in zero_days:
            continue
        design = np.column_stack([np.ones(n_regions), x])
        theta = design @ np.asarray(psi.beta)
        sigma = np.exp(design @ np.asarray(psi.beta_prime))
        u = np.clip(rng.random(n_regions), 1e-300, 1.0 - 1e-16)
        y = theta - sigma * np.log(np.expm1(-np.log(u) / psi.alpha))
        counts = np.round(areas * np.power(10.0, y))
        all_cases[:, d - 1] = np.clip(counts, 0, 2**62).astype(np.int64)
    return [
        RegionRecord(f"Region{i:04d}", int(pops[i]), float(areas[i]), all_cases[i])
        for i in range(n_regions)
    ]


def write_corpus(records, regions_path, cases_path):
    """Write RegionRecords in the two-file input format."""
    with open(regions_path, "w", newline="") as fh:
        fh.write("Region,Population,Area\n")
        for r in records:
            fh.write(f"{r.region},{r.population},{repr(r.area_hectares)}\n")
    with open(cases_path, "w", newline="") as fh:
        n_days = records[0].daily_cases.size
        fh.write("Region," + ",".join(f"Day{k}" for k in range(1, n_days + 1)) + "\n")
        for r in records:
            fh.write(r.region + "," + ",".join(str(int(c)) for c in r.daily_cases) + "\n")


def bglr_draw_loglik(ds: Dataset, row) -> float:
    """Adapter mapping a chain draw row (b..., bp..., alpha) to the
    generalized logistic likelihood."""
    row = np.asarray(row, dtype=float)
    p = ds.p
    return _loglik_raw(ds.design, ds.response, row[:p], row[p:2 * p], row[2 * p])


def fit_bayesian(ds: Dataset, model: str, prior, proposal, n_iter: int,
                 burn_in: int, n_chains: int, seed: int) -> FitResult:
    """Run chains for one Bayesian model and derive summary/R-hat/DIC."""
    likelihood = {"bglr": "gld", "bnr": "normal"}[model]
    chains = mcmc.run_chains(ds, prior, proposal, n_iter, burn_in,
                             n_chains, seed, likelihood=likelihood)
    summary = diagnostics.summarize(chains)
    rhat = diagnostics.gelman_rubin(chains) if n_chains >= 2 else None
    loglik = bglr_draw_loglik if model == "bglr" else bnr_draw_loglik
    dic_result = diagnostics.dic(chains, ds, loglik)
    return FitResult(model=model, chains=chains, summary=summary,
                     rhat=rhat, dic=dic_result)


def _day_seed(config: RunConfig, day_index: int, model: str) -> int:
    return config.seed + 1000 * day_index + {"bglr": 0, "bnr": 500}[model]


def fit_day(day_ds: DayDataset, config: RunConfig) -> DayFitRecord:
    """Fit every selected model on one day's dataset.

    A failing model is recorded under failures and does not abort the
    day.  Summary fields are populated only for models whose chains pass
    the R-hat convergence check; R-hat values, convergence flags and DIC
    are always recorded for models that ran.
    """
    rec = DayFitRecord(
        day_index=day_ds.day_index,
        n_included=day_ds.n_included,
        n_excluded_zero=day_ds.n_excluded_zero,
        fittable=day_ds.fittable,
    )
    if not day_ds.fittable:
        reason = day_ds.provenance.get("unfittable_reason", "unfittable")
        rec.failures["day"] = reason
        return rec
    ds = day_ds.dataset

    if "slr" in config.models:
        try:
            rec.slr = slr_fit(ds)
        except (ValueError, np.linalg.LinAlgError) as exc:
            rec.failures["slr"] = str(exc)

    fits = {}
    for model in ("bglr", "bnr"):
        if model not in config.models:
            continue
        try:
            fit = fit_bayesian(
                ds, model, config.prior(), config.proposal(2 * ds.p),
                config.iterations, config.burn_in, config.chains,
                _day_seed(config, day_ds.day_index, model),
            )
        except (ChainInitError, ValueError, RuntimeError) as exc:
            rec.failures[model] = str(exc)
            continue
        fits[model] = fit
        rec.model_converged[model] = fit.converged
        if fit.rhat is not None:
            rec.model_rhat[model] = fit.rhat.to_dict()
        rec.model_dic[model] = {"dic": fit.dic.dic, "p_dic": fit.dic.p_dic}
        if fit.converged:
            rec.model_summaries[model] = fit.summary.to_dict()

    if "bglr" in fits and "bnr" in fits:
        rec.dic_difference = diagnostics.dic_difference(
            fits["bnr"].dic, fits["bglr"].dic)
        if fits["bglr"].converged and fits["bnr"].converged:
            rec.delta_b0 = (fits["bglr"].summary.stat("b0")["mean"]
                            - fits["bnr"].summary.stat("b0")["mean"])
            rec.delta_b1 = (fits["bglr"].summary.stat("b1")["mean"]
                            - fits["bnr"].summary.stat("b1")["mean"])
    return rec


def _fit_one_day(args):
    regions, config, day = args
    return fit_day(build_day_dataset(regions, day), config)


def fit_all_days(regions, config: RunConfig, day_range=None) -> list:
    """Fit every day in the range (1-based, inclusive); days are
    independent and may be processed by a worker pool."""
    n_days = regions[0].daily_cases.size
    start = day_range[0] if day_range else (config.day_start or 1)
    end = day_range[1] if day_range else (config.day_end or n_days)
    if not 1 <= start <= end <= n_days:
        raise ValueError(f"invalid day range [{start}, {end}] for {n_days} days")
    days = list(range(start, end + 1))
    workers = min(config.resolved_threads(), len(days))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_fit_one_day,
                                    [(regions, config, d) for d in days],
                                    chunksize=1))
    else:
        records = [_fit_one_day((regions, config, d)) for d in days]
    return records


def _time_series_columns() -> list:
    cols = ["day", "fittable", "n_included", "n_excluded_zero",
            "slr_b0", "slr_b1", "slr_se_b0", "slr_se_b1", "slr_residual_variance"]
    for model, params in _MODEL_PARAMS.items():
        for param in params:
            cols.extend(f"{model}_{param}_{stat}" for stat in _STATS)
            cols.append(f"{model}_{param}_rhat")
        cols.extend([f"{model}_converged", f"{model}_dic", f"{model}_p_dic",
                     f"{model}_error"])
    cols.extend(["dic_difference", "delta_b0", "delta_b1", "day_error"])
    return cols


TIME_SERIES_COLUMNS = _time_series_columns()


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(float(value))  # guards against numpy scalar reprs
    return str(value)


def _record_row(rec: DayFitRecord) -> dict:
    row = {c: None for c in TIME_SERIES_COLUMNS}
    row.update(day=rec.day_index, fittable=rec.fittable,
               n_included=rec.n_included, n_excluded_zero=rec.n_excluded_zero)
    if rec.slr is not None:
        row["slr_b0"], row["slr_b1"] = map(float, rec.slr.beta)
        row["slr_se_b0"], row["slr_se_b1"] = map(float, rec.slr.standard_errors)
        row["slr_residual_variance"] = rec.slr.residual_variance
    for model, params in _MODEL_PARAMS.items():
        stats = rec.model_summaries.get(model)
        rhats = rec.model_rhat.get(model)
        for param in params:
            if stats is not None:
                for stat in _STATS:
                    row[f"{model}_{param}_{stat}"] = stats[param][stat]
            if rhats is not None:
                row[f"{model}_{param}_rhat"] = rhats[param]
        if model in rec.model_converged:
            row[f"{model}_converged"] = rec.model_converged[model]
        if model in rec.model_dic:
            row[f"{model}_dic"] = rec.model_dic[model]["dic"]
            row[f"{model}_p_dic"] = rec.model_dic[model]["p_dic"]
        if model in rec.failures:
            row[f"{model}_error"] = rec.failures[model]
    row["dic_difference"] = rec.dic_difference
    row["delta_b0"] = rec.delta_b0
    row["delta_b1"] = rec.delta_b1
    row["day_error"] = rec.failures.get("day")
    return row


def export_time_series(records, path):
    """One row per day with the documented stable column set."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TIME_SERIES_COLUMNS)
        for rec in records:
            row = _record_row(rec)
            writer.writerow([_fmt(row[c]) for c in TIME_SERIES_COLUMNS])


def write_manifest(path, config: RunConfig, records, n_regions: int,
                   software_version: str):
    """Reproducibility manifest: echoed config, digest, seeds, failures."""
    cfg = config.to_dict()
    digest = hashlib.sha256(
        json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]
    failed = sorted({r.day_index for r in records if r.failures})
    unfittable = sorted(r.day_index for r in records if not r.fittable)
    manifest = {
        "config": cfg,
        "config_digest": digest,
        "base_seed": config.seed,
        "software_version": software_version,
        "n_regions": n_regions,
        "n_days_fitted": len(records),
        "failed_days": failed,
        "unfittable_days": unfittable,
        "units_note": ("x = log10(population/area), y = log10(cases/area); "
                       "areas are used in the units of the input file"),
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
