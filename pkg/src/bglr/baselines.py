"""Comparison models: fixed-variance least squares and Bayesian normal
regression with a log-variance linear predictor.

The normal baseline (BNR) mirrors the generalized logistic model's
linear predictors but swaps the likelihood: y_i ~ N(x_i'beta,
exp(x_i'beta')), i.e. beta' models log *variance* here, whereas the
generalized logistic model's beta' models log scale.  There is no shape
parameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import diagnostics, mcmc
from .regression import Dataset

__all__ = [
    "SlrFit",
    "slr_fit",
    "bnr_log_likelihood",
    "bnr_draw_loglik",
    "bnr_fit",
]

LOG_TWO_PI = math.log(2.0 * math.pi)
NEG_INF = float("-inf")


@dataclass
class SlrFit:
    """Ordinary least squares fit with homoscedastic standard errors."""

    beta: np.ndarray
    residual_variance: float
    standard_errors: np.ndarray


def slr_fit(ds: Dataset) -> SlrFit:
    """Solve the least-squares normal equations.

    residual_variance = RSS / (n - p); standard errors come from the
    classical fixed-variance formula sqrt(diag(s^2 (X'X)^-1)).
    """
    X, y = ds.design, ds.response
    n, p = X.shape
    if n <= p:
        raise ValueError("need n > p for a residual variance")
    gram = X.T @ X
    beta = np.linalg.solve(gram, X.T @ y)
    resid = y - X @ beta
    rss = float(resid @ resid)
    s2 = rss / (n - p)
    se = np.sqrt(s2 * np.diag(np.linalg.inv(gram)))
    return SlrFit(beta=beta, residual_variance=s2, standard_errors=se)


def bnr_log_likelihood(ds: Dataset, beta, beta_prime) -> float:
    """Normal log likelihood with mean x'beta and log-variance x'beta'."""
    beta = np.asarray(beta, dtype=float)
    beta_prime = np.asarray(beta_prime, dtype=float)
    if not (np.all(np.isfinite(beta)) and np.all(np.isfinite(beta_prime))):
        return NEG_INF
    if beta.shape[0] != ds.p or beta_prime.shape[0] != ds.p:
        raise ValueError("coefficient length must match design columns")
    eta_p = ds.design @ beta_prime
    r = ds.response - ds.design @ beta
    with np.errstate(over="ignore", invalid="ignore"):
        ll = -0.5 * (ds.n * LOG_TWO_PI + eta_p.sum()
                     + (r * r * np.exp(-eta_p)).sum())
    return float(ll) if np.isfinite(ll) else NEG_INF


def bnr_draw_loglik(ds: Dataset, row) -> float:
    """Adapter mapping a chain draw row (b..., bp...) to the likelihood."""
    row = np.asarray(row, dtype=float)
    p = ds.p
    return bnr_log_likelihood(ds, row[:p], row[p:2 * p])


def bnr_fit(ds: Dataset, prior: mcmc.PriorSpec, proposal: mcmc.ProposalConfig,
            n_iter: int, burn_in: int, n_chains: int, seed: int):
    """Posterior sampling for the normal baseline via the shared engine.

    Returns (chains, summary, dic_result); the DIC uses the normal
    likelihood in both of its terms.
    """
    chains = mcmc.run_chains(ds, prior, proposal, n_iter, burn_in,
                             n_chains, seed, likelihood="normal")
    summary = diagnostics.summarize(chains)
    dic_result = diagnostics.dic(chains, ds, bnr_draw_loglik)
    return chains, summary, dic_result
