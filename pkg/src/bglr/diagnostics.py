"""Posterior summaries, the Gelman-Rubin diagnostic, and DIC.

Quantiles use linear interpolation between the closest order statistics
(numpy's default rule): with n sorted draws, quantile q sits at position
1 + (n - 1) * q in 1-based indexing, interpolating linearly between the
two neighbouring order statistics.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .regression import Dataset

__all__ = [
    "PosteriorSummary",
    "RhatReport",
    "DicResult",
    "DicError",
    "summarize",
    "gelman_rubin",
    "dic",
    "dic_difference",
    "write_summary_csv",
]

RHAT_THRESHOLD = 1.1
_RHAT_FLOOR = 0.9  # values materially below 1 indicate a computation bug


class DicError(RuntimeError):
    """Raised when the plug-in log likelihood is not finite."""


@dataclass
class PosteriorSummary:
    """Pooled per-parameter summaries of the retained draws."""

    names: tuple
    mean: np.ndarray
    median: np.ndarray
    sd: np.ndarray
    q025: np.ndarray
    q975: np.ndarray
    n_draws: int

    def __post_init__(self):
        if not (np.all(self.q025 <= self.median + 1e-12)
                and np.all(self.median <= self.q975 + 1e-12)):
            raise ValueError("quantiles out of order: need q2.5 <= median <= q97.5")

    def stat(self, name: str) -> dict:
        i = self.names.index(name)
        return {
            "mean": float(self.mean[i]),
            "median": float(self.median[i]),
            "sd": float(self.sd[i]),
            "q025": float(self.q025[i]),
            "q975": float(self.q975[i]),
        }

    def to_dict(self) -> dict:
        return {name: self.stat(name) for name in self.names}


@dataclass
class RhatReport:
    """Potential scale reduction factors and the overall convergence call."""

    names: tuple
    rhat: np.ndarray
    n_chains: int
    converged: bool
    threshold: float = RHAT_THRESHOLD

    def __post_init__(self):
        if np.any(self.rhat < _RHAT_FLOOR):
            raise RuntimeError(
                f"R-hat below {_RHAT_FLOOR}: likely a computation bug "
                f"(values {self.rhat})"
            )

    def stat(self, name: str) -> float:
        return float(self.rhat[self.names.index(name)])

    def to_dict(self) -> dict:
        return {name: self.stat(name) for name in self.names}


@dataclass
class DicResult:
    """Deviance information criterion pieces for one fitted model."""

    p_dic: float
    dic: float
    plug_in_psi: dict
    dataset_digest: str = ""
    mean_draw_loglik: float = float("nan")
    plug_in_loglik: float = float("nan")


def _pooled(chains) -> np.ndarray:
    if len(chains) == 0:
        raise ValueError("need at least one chain")
    columns = chains[0].columns
    for c in chains:
        if c.columns != columns:
            raise ValueError("chains have mismatched column layouts")
    return np.vstack([c.draws for c in chains])


def summarize(chains) -> PosteriorSummary:
    """Pool all chains and summarize each parameter column."""
    draws = _pooled(chains)
    if draws.shape[0] < 2:
        raise ValueError("need at least 2 retained draws to summarize")
    q025, med, q975 = np.quantile(draws, [0.025, 0.5, 0.975], axis=0)
    return PosteriorSummary(
        names=chains[0].columns,
        mean=draws.mean(axis=0),
        median=med,
        sd=draws.std(axis=0, ddof=1),
        q025=q025,
        q975=q975,
        n_draws=draws.shape[0],
    )


def gelman_rubin(chains, threshold: float = RHAT_THRESHOLD,
                 split: bool = False) -> RhatReport:
    """Classical potential scale reduction factor per parameter.

    R-hat = sqrt(((n-1)/n * W + B/n) / W) with W the mean within-chain
    variance and B the between-chain variance of the chain means.  With
    split=True each chain is halved first (a stricter variant that also
    catches within-chain drift).
    """
    if len(chains) < 2:
        raise ValueError("Gelman-Rubin needs at least 2 chains")
    columns = chains[0].columns
    lengths = {c.draws.shape[0] for c in chains}
    if len(lengths) != 1:
        raise ValueError("chains must have equal length")
    for c in chains:
        if c.columns != columns:
            raise ValueError("chains have mismatched column layouts")
    seqs = [c.draws for c in chains]
    if split:
        halved = []
        for d in seqs:
            h = d.shape[0] // 2
            halved.extend([d[:h], d[h:2 * h]])
        seqs = halved
    n = seqs[0].shape[0]
    if n < 10:
        raise ValueError("need chains of length >= 10")
    stacked = np.stack(seqs)                       # (K, n, params)
    means = stacked.mean(axis=1)                   # (K, params)
    within = stacked.var(axis=1, ddof=1).mean(axis=0)
    between = n * means.var(axis=0, ddof=1)
    var_plus = (n - 1) / n * within + between / n
    with np.errstate(divide="ignore", invalid="ignore"):
        rhat = np.sqrt(var_plus / within)
    rhat = np.where(within == 0.0, 1.0, rhat)      # constant chains: no spread
    return RhatReport(names=columns, rhat=rhat, n_chains=len(chains),
                      converged=bool(np.all(rhat < threshold)),
                      threshold=threshold)


def dic(chains, ds: Dataset, model_loglik, plug_in: str = "mean") -> DicResult:
    """Deviance information criterion from retained draws.

    model_loglik(ds, draw_row) must return the model's log likelihood at
    one parameter row.  The plug-in point is the per-parameter posterior
    mean (or median via plug_in="median").  The penalty is
    2 * (loglik(plug-in) - mean over draws of loglik), and
    DIC = -2 * loglik(plug-in) + 2 * penalty.

    When every chain carries a finite per-draw log-likelihood trace the
    mean-over-draws term reuses it instead of re-evaluating the model.
    """
    draws = _pooled(chains)
    if plug_in not in ("mean", "median"):
        raise ValueError("plug_in must be 'mean' or 'median'")
    point = draws.mean(axis=0) if plug_in == "mean" else np.median(draws, axis=0)

    ll_hat = float(model_loglik(ds, point))
    if not math.isfinite(ll_hat):
        raise DicError("log likelihood at the plug-in point is not finite")

    traces = [c.log_likelihood_trace for c in chains]
    if all(np.all(np.isfinite(t)) for t in traces):
        mean_ll = float(np.concatenate(traces).mean())
    else:
        mean_ll = float(np.mean([model_loglik(ds, row) for row in draws]))

    p_dic = 2.0 * (ll_hat - mean_ll)
    if p_dic < 0.0:
        warnings.warn(f"negative effective parameter count p_dic={p_dic:.4g}; "
                      "DIC is unreliable here", RuntimeWarning, stacklevel=2)
    return DicResult(
        p_dic=p_dic,
        dic=-2.0 * ll_hat + 2.0 * p_dic,
        plug_in_psi=dict(zip(chains[0].columns, map(float, point))),
        dataset_digest=ds.digest(),
        mean_draw_loglik=mean_ll,
        plug_in_loglik=ll_hat,
    )


def dic_difference(model_a: DicResult, model_b: DicResult) -> float:
    """model_a.dic - model_b.dic; both must refer to the same dataset.

    With a = the normal baseline and b = the generalized logistic model,
    a positive value prefers the generalized logistic model.
    """
    if model_a.dataset_digest and model_b.dataset_digest:
        if model_a.dataset_digest != model_b.dataset_digest:
            raise ValueError("DIC results come from different datasets")
    return model_a.dic - model_b.dic


def write_summary_csv(summary: PosteriorSummary, path, rhat: RhatReport | None = None):
    """Flat per-parameter report: one row per parameter."""
    with open(path, "w", newline="") as fh:
        cols = ["parameter", "mean", "median", "sd", "q025", "q975"]
        if rhat is not None:
            cols.append("rhat")
        fh.write(",".join(cols) + "\n")
        for name in summary.names:
            s = summary.stat(name)
            row = [name] + [repr(s[k]) for k in ("mean", "median", "sd", "q025", "q975")]
            if rhat is not None:
                row.append(repr(rhat.stat(name)))
            fh.write(",".join(row) + "\n")
