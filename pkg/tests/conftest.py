"""Shared fixtures and the acceptance-criterion reporting hook.

Acceptance tests register one line per criterion; the lines are printed
in the terminal summary so a full run ends with an explicit pass/fail
roster of the acceptance gate.
"""

from __future__ import annotations

import numpy as np
import pytest

from bglr.mcmc import Chain

ACCEPTANCE_RESULTS: list = []


def record_criterion(number: int, description: str, passed: bool, detail: str = ""):
    ACCEPTANCE_RESULTS.append((number, description, passed, detail))
    assert passed, f"criterion {number} ({description}) failed: {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, description, passed, detail in sorted(ACCEPTANCE_RESULTS):
        status = "PASS" if passed else "FAIL"
        line = f"[{status}] criterion {number}: {description}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)


def make_chain(draws, columns, seed=0, digest="test:0000", loglik=None) -> Chain:
    """Assemble a structurally valid Chain around given draws."""
    draws = np.asarray(draws, dtype=float)
    m = draws.shape[0]
    if loglik is None:
        loglik = np.zeros(m)
    return Chain(
        draws=draws,
        log_posterior_trace=np.zeros(m),
        log_likelihood_trace=np.asarray(loglik, dtype=float),
        acceptance_rate_by_block={c: 0.3 for c in columns},
        seed=seed,
        config_digest=digest,
        columns=tuple(columns),
        start_point=draws[0].copy() if m else np.zeros(len(columns)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
