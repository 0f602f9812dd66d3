"""Polygamma special functions on the positive reals.

Implements digamma, trigamma and tetragamma by shifting the argument
above 10 with the recurrence relations and then evaluating the
asymptotic Bernoulli series.  Accuracy is near machine precision over
[1e-3, 1e6], which is all the moment formulas and gamma densities in
this package require.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["log_gamma", "digamma", "trigamma", "tetragamma"]

_SHIFT = 10.0


def _validate_positive(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)) or np.any(x <= 0.0):
        raise ValueError("argument must be finite and > 0")


def log_gamma(x: float) -> float:
    """Natural log of the gamma function for scalar x > 0."""
    if not math.isfinite(x) or x <= 0.0:
        raise ValueError("log_gamma requires finite x > 0")
    return math.lgamma(x)


def _shifted(x, step):
    """Apply `acc += step(x); x += 1` until every element is >= _SHIFT."""
    x = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    acc = np.zeros_like(x)
    # x > 0, so at most ceil(_SHIFT) passes are ever needed
    for _ in range(int(_SHIFT)):
        low = x < _SHIFT
        if not low.any():
            break
        acc[low] += step(x[low])
        x[low] += 1.0
    return x, acc


def digamma(x):
    """Digamma function; accepts a scalar or ndarray of positive reals."""
    arr = np.asarray(x, dtype=float)
    _validate_positive(arr)
    scalar = arr.ndim == 0
    xs, acc = _shifted(arr, lambda t: -1.0 / t)
    inv = 1.0 / xs
    inv2 = inv * inv
    # tail of ln x - 1/(2x) - sum_k B_{2k} / (2k x^{2k})
    series = inv2 * (
        1.0 / 12.0
        - inv2 * (1.0 / 120.0
                  - inv2 * (1.0 / 252.0
                            - inv2 * (1.0 / 240.0
                                      - inv2 * (1.0 / 132.0
                                                - inv2 * (691.0 / 32760.0
                                                          - inv2 / 12.0)))))
    )
    out = acc + np.log(xs) - 0.5 * inv - series
    return float(out[0]) if scalar else out


def trigamma(x):
    """First derivative of digamma; scalar or ndarray, positive reals."""
    arr = np.asarray(x, dtype=float)
    _validate_positive(arr)
    scalar = arr.ndim == 0
    xs, acc = _shifted(arr, lambda t: 1.0 / (t * t))
    inv = 1.0 / xs
    inv2 = inv * inv
    tail = inv2 * inv * (
        1.0 / 6.0
        - inv2 * (1.0 / 30.0
                  - inv2 * (1.0 / 42.0
                            - inv2 * (1.0 / 30.0
                                      - inv2 * (5.0 / 66.0
                                                - inv2 * (691.0 / 2730.0
                                                          - inv2 * 7.0 / 6.0)))))
    )
    out = acc + inv + 0.5 * inv2 + tail
    return float(out[0]) if scalar else out


def tetragamma(x):
    """Second derivative of digamma; scalar or ndarray, positive reals."""
    arr = np.asarray(x, dtype=float)
    _validate_positive(arr)
    scalar = arr.ndim == 0
    xs, acc = _shifted(arr, lambda t: -2.0 / (t * t * t))
    inv = 1.0 / xs
    inv2 = inv * inv
    tail = inv2 * inv2 * (
        0.5
        - inv2 * (1.0 / 6.0
                  - inv2 * (1.0 / 6.0
                            - inv2 * (3.0 / 10.0
                                      - inv2 * (5.0 / 6.0
                                                - inv2 * (8983.0 / 2730.0
                                                          - inv2 * 17.5)))))
    )
    out = acc - inv2 - inv2 * inv - tail
    return float(out[0]) if scalar else out
