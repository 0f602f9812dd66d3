"""Generalized logistic regression model with dual linear predictors.

The location of each response is an identity-linked linear predictor
x_i'beta and the scale is log-linked, sigma_i = exp(x_i'beta'), so the
slope entries of beta' measure scedasticity: positive values mean the
response spread grows with the covariate, negative values mean it
shrinks, zero is homoscedastic.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

__all__ = [
    "Dataset",
    "ParamVector",
    "LinearPredictors",
    "scale_clamp_counter",
    "linear_predictors",
    "predict_location",
    "predict_scale",
    "log_likelihood",
    "log_likelihood_gradient",
    "residuals",
]

# linear predictors for log sigma are clamped here before exponentiation
ETA_PRIME_LIMIT = 700.0

NEG_INF = float("-inf")


class _ClampCounter:
    """Counts how often predict_scale had to clamp a linear predictor."""

    def __init__(self):
        self.count = 0

    def add(self, k: int):
        self.count += int(k)

    def reset(self):
        self.count = 0


scale_clamp_counter = _ClampCounter()


@dataclass
class Dataset:
    """Design matrix (intercept column first) and response vector.

    Validated at construction: finite entries, full column rank,
    n >= p + 1, and an all-ones first column.
    """

    design: np.ndarray
    response: np.ndarray

    def __post_init__(self):
        self.design = np.asarray(self.design, dtype=float)
        self.response = np.asarray(self.response, dtype=float)
        if self.design.ndim != 2 or self.response.ndim != 1:
            raise ValueError("design must be 2-D and response 1-D")
        n, p = self.design.shape
        if self.response.shape[0] != n:
            raise ValueError("design and response row counts differ")
        if n < p + 1:
            raise ValueError(f"need n >= p + 1 rows, got n={n}, p={p}")
        if not np.all(np.isfinite(self.design)):
            raise ValueError("design contains non-finite entries")
        if not np.all(np.isfinite(self.response)):
            raise ValueError("response contains non-finite entries")
        if not np.all(self.design[:, 0] == 1.0):
            raise ValueError("first design column must be the intercept (all ones)")
        if np.linalg.matrix_rank(self.design) < p:
            raise ValueError("design matrix is rank deficient")

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def p(self) -> int:
        return self.design.shape[1]

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.design.tobytes())
        h.update(self.response.tobytes())
        return h.hexdigest()


@dataclass
class ParamVector:
    """Mean coefficients, scale coefficients, and the shape parameter."""

    beta: np.ndarray
    beta_prime: np.ndarray
    alpha: float

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        self.beta_prime = np.asarray(self.beta_prime, dtype=float)
        self.alpha = float(self.alpha)
        if self.beta.ndim != 1 or self.beta_prime.ndim != 1:
            raise ValueError("coefficient vectors must be 1-D")
        if self.beta.shape != self.beta_prime.shape:
            raise ValueError("beta and beta_prime must have equal length")
        if not (np.all(np.isfinite(self.beta)) and np.all(np.isfinite(self.beta_prime))
                and math.isfinite(self.alpha)):
            raise ValueError("parameters must be finite")
        if self.alpha <= 0.0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")

    @property
    def p(self) -> int:
        return self.beta.shape[0]

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.beta, self.beta_prime, [self.alpha]])

    @classmethod
    def from_vector(cls, vec, p: int) -> "ParamVector":
        vec = np.asarray(vec, dtype=float)
        return cls(beta=vec[:p], beta_prime=vec[p:2 * p], alpha=vec[2 * p])


@dataclass
class LinearPredictors:
    eta: np.ndarray        # location predictor, response units
    eta_prime: np.ndarray  # log-scale predictor


def _check_dims(ds: Dataset, psi: ParamVector):
    if psi.p != ds.p:
        raise ValueError(f"parameter length {psi.p} != design columns {ds.p}")


def linear_predictors(ds: Dataset, psi: ParamVector) -> LinearPredictors:
    """Both linear predictors, before any link transformation."""
    _check_dims(ds, psi)
    return LinearPredictors(eta=ds.design @ psi.beta,
                            eta_prime=ds.design @ psi.beta_prime)


def predict_location(ds: Dataset, psi: ParamVector) -> np.ndarray:
    """Per-observation location theta_i = x_i'beta."""
    _check_dims(ds, psi)
    return ds.design @ psi.beta


def predict_scale(ds: Dataset, psi: ParamVector) -> np.ndarray:
    """Per-observation scale sigma_i = exp(x_i'beta'), always positive.

    Predictors beyond +-700 are clamped before exponentiation (float64
    overflow guard); each clamped entry increments scale_clamp_counter.
    """
    _check_dims(ds, psi)
    eta_p = ds.design @ psi.beta_prime
    clamped = np.abs(eta_p) > ETA_PRIME_LIMIT
    if clamped.any():
        scale_clamp_counter.add(clamped.sum())
        eta_p = np.clip(eta_p, -ETA_PRIME_LIMIT, ETA_PRIME_LIMIT)
    return np.exp(eta_p)


def _loglik_raw(design, y, beta, beta_prime, alpha) -> float:
    """Log likelihood from raw arrays; -inf sentinel instead of raising.

    Total by construction so the samplers can evaluate candidate values
    without building validated parameter objects.
    """
    if not np.isfinite(alpha) or alpha <= 0.0:
        return NEG_INF
    eta = design @ beta
    eta_p = design @ beta_prime
    with np.errstate(over="ignore", invalid="ignore"):
        z = (y - eta) * np.exp(-eta_p)
        ll = (y.size * math.log(alpha) - eta_p.sum() - z.sum()
              - (alpha + 1.0) * np.logaddexp(0.0, -z).sum())
    return float(ll) if np.isfinite(ll) else NEG_INF


def log_likelihood(ds: Dataset, psi: ParamVector) -> float:
    """Sum over observations of the generalized logistic log density at
    (theta_i, sigma_i, alpha) given by the two linear predictors."""
    _check_dims(ds, psi)
    return _loglik_raw(ds.design, ds.response, psi.beta, psi.beta_prime, psi.alpha)


def log_likelihood_gradient(ds: Dataset, psi: ParamVector) -> np.ndarray:
    """Analytic gradient of log_likelihood in (beta, beta_prime, log alpha).

    Kept alongside the likelihood for optimizer reuse and so tests can
    pin the likelihood's shape against finite differences; the sampler
    itself is gradient-free.
    """
    _check_dims(ds, psi)
    X, y = ds.design, ds.response
    eta = X @ psi.beta
    eta_p = X @ psi.beta_prime
    inv_sigma = np.exp(-eta_p)
    z = (y - eta) * inv_sigma
    w = expit(-z)
    a1 = psi.alpha + 1.0
    g_beta = X.T @ ((1.0 - a1 * w) * inv_sigma)
    g_beta_prime = X.T @ (-1.0 + z * (1.0 - a1 * w))
    g_log_alpha = y.size - psi.alpha * np.logaddexp(0.0, -z).sum()
    return np.concatenate([g_beta, g_beta_prime, [g_log_alpha]])


def residuals(ds: Dataset, psi: ParamVector) -> np.ndarray:
    """Scale-standardized residuals (y_i - theta_i) / sigma_i."""
    theta = predict_location(ds, psi)
    sigma = predict_scale(ds, psi)
    return (ds.response - theta) / sigma
