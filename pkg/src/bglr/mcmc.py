"""Random-walk Metropolis-Hastings sampler for the regression posterior.

The parameter vector is updated one block at a time (each mean
coefficient, each scale coefficient, then the shape parameter) with its
own accept/reject test, which preserves the target distribution while
only requiring scalar step sizes.  Coefficients use symmetric normal
proposals; the shape parameter uses a moment-matched gamma proposal
(mean at the current value, configurable variance) whose asymmetry is
corrected by the Hastings q-ratio.

All accept/reject arithmetic happens in log space; a uniform draw is
compared against exp(min(0, log lambda)).  Step sizes adapt toward a
target acceptance rate during burn-in only and are frozen afterwards,
so the retained draws come from a fixed kernel.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from . import specfun
from .regression import Dataset, ParamVector

__all__ = [
    "PriorSpec",
    "ProposalConfig",
    "Chain",
    "ChainInitError",
    "log_prior",
    "log_posterior",
    "propose_coef",
    "propose_alpha",
    "alpha_proposal_log_density",
    "alpha_log_q_ratio",
    "gamma_log_density",
    "mh_step",
    "run_chain",
    "run_chains",
    "random_walk_chain",
    "coef_block_names",
    "split_columns",
    "config_digest",
    "write_chain_csv",
]

LOG_TWO_PI = math.log(2.0 * math.pi)
NEG_INF = float("-inf")
_ETA_LIMIT = 700.0
_REFRESH_EVERY = 1000  # full cache recompute cadence (floating-point hygiene)


class ChainInitError(RuntimeError):
    """Raised when a chain cannot start (e.g. -inf posterior at the init)."""


@dataclass
class PriorSpec:
    """Independent priors: N(0, coef_variance) on every coefficient and a
    gamma(alpha_shape, alpha_rate) prior on the shape parameter."""

    coef_variance: float = 1e4
    alpha_shape: float = 1.0
    alpha_rate: float = 1.0

    def __post_init__(self):
        if min(self.coef_variance, self.alpha_shape, self.alpha_rate) <= 0.0:
            raise ValueError("all prior hyperparameters must be > 0")


@dataclass
class ProposalConfig:
    """Random-walk step sizes and burn-in adaptation settings."""

    coef_step_sd: np.ndarray
    alpha_proposal_variance: float = 0.1
    adapt: bool = True
    adapt_target_rate: float = 0.3
    adapt_window: int = 200

    def __post_init__(self):
        self.coef_step_sd = np.asarray(self.coef_step_sd, dtype=float)
        if self.coef_step_sd.ndim != 1 or np.any(self.coef_step_sd <= 0.0):
            raise ValueError("coef_step_sd must be a 1-D vector of positives")
        if self.alpha_proposal_variance <= 0.0:
            raise ValueError("alpha_proposal_variance must be > 0")
        if not 0.0 < self.adapt_target_rate < 1.0:
            raise ValueError("adapt_target_rate must be in (0, 1)")
        if self.adapt_window < 1:
            raise ValueError("adapt_window must be >= 1")

    @classmethod
    def default(cls, n_coef: int, initial_sd: float = 0.1, **kwargs) -> "ProposalConfig":
        return cls(coef_step_sd=np.full(n_coef, initial_sd), **kwargs)


@dataclass
class Chain:
    """Post-burn-in draws of one chain plus provenance.

    Columns are b0..b{p-1}, bp0..bp{p-1} and (for the generalized
    logistic likelihood) alpha.
    """

    draws: np.ndarray
    log_posterior_trace: np.ndarray
    log_likelihood_trace: np.ndarray
    acceptance_rate_by_block: dict
    seed: int
    config_digest: str
    columns: tuple
    start_point: np.ndarray

    def __post_init__(self):
        m = self.draws.shape[0]
        if self.draws.ndim != 2 or self.draws.shape[1] != len(self.columns):
            raise ValueError("draws shape inconsistent with columns")
        if len(self.log_posterior_trace) != m or len(self.log_likelihood_trace) != m:
            raise ValueError("trace length must equal draw count")
        if set(self.acceptance_rate_by_block) != set(self.columns):
            raise ValueError("acceptance bookkeeping does not match columns")
        if "alpha" in self.columns:
            a = self.draws[:, self.columns.index("alpha")]
            if m and not np.all(a > 0.0):
                raise ValueError("alpha draws must be strictly positive")

    @property
    def model(self) -> str:
        return self.config_digest.split(":", 1)[0]

    @property
    def n_draws(self) -> int:
        return self.draws.shape[0]


def coef_block_names(p: int) -> list:
    return [f"b{j}" for j in range(p)] + [f"bp{j}" for j in range(p)]


def split_columns(columns) -> tuple:
    """Recover (p, has_alpha) from a chain's column names."""
    has_alpha = "alpha" in columns
    n_coef = len(columns) - (1 if has_alpha else 0)
    if n_coef % 2 != 0:
        raise ValueError(f"unrecognized column layout: {columns}")
    return n_coef // 2, has_alpha


def _normal_logpdf(x: float, variance: float) -> float:
    return -0.5 * (LOG_TWO_PI + math.log(variance)) - 0.5 * x * x / variance


def gamma_log_density(x: float, shape: float, rate: float) -> float:
    """Log density of the gamma distribution in shape/rate form."""
    if x <= 0.0 or not math.isfinite(x):
        return NEG_INF
    return (shape * math.log(rate) - specfun.log_gamma(shape)
            + (shape - 1.0) * math.log(x) - rate * x)


def log_prior(psi, prior: PriorSpec) -> float:
    """Joint log prior; -inf sentinel when the shape parameter is <= 0.

    Accepts any object with beta / beta_prime / alpha attributes so the
    sentinel branch is reachable without building a validated vector.
    """
    alpha = psi.alpha
    if not math.isfinite(alpha) or alpha <= 0.0:
        return NEG_INF
    v = prior.coef_variance
    coefs = np.concatenate([np.asarray(psi.beta, float),
                            np.asarray(psi.beta_prime, float)])
    lp = (-0.5 * coefs.size * (LOG_TWO_PI + math.log(v))
          - 0.5 * float(coefs @ coefs) / v)
    return lp + gamma_log_density(alpha, prior.alpha_shape, prior.alpha_rate)


def log_posterior(ds: Dataset, psi, prior: PriorSpec) -> float:
    """Unnormalized log posterior: log likelihood plus log prior."""
    from .regression import _loglik_raw

    lp = log_prior(psi, prior)
    if lp == NEG_INF:
        return NEG_INF
    ll = _loglik_raw(ds.design, ds.response,
                     np.asarray(psi.beta, float),
                     np.asarray(psi.beta_prime, float), psi.alpha)
    return ll + lp


def propose_coef(current: float, step_sd: float, rng) -> tuple:
    """Symmetric normal random-walk proposal; q-ratio is identically 0."""
    if step_sd <= 0.0:
        raise ValueError("step_sd must be > 0")
    return current + step_sd * rng.standard_normal(), 0.0


def alpha_proposal_log_density(x: float, mean: float, variance: float) -> float:
    """Density of the gamma kernel with the given mean and variance."""
    return gamma_log_density(x, mean * mean / variance, mean / variance)


def alpha_log_q_ratio(current: float, candidate: float, variance: float) -> float:
    """Hastings correction log q(current|candidate) - log q(candidate|current)."""
    return (alpha_proposal_log_density(current, candidate, variance)
            - alpha_proposal_log_density(candidate, current, variance))


def propose_alpha(current: float, proposal_variance: float, rng) -> tuple:
    """Gamma proposal with mean at the current value, plus its q-ratio.

    Matching the first two moments gives shape = current^2 / v and
    rate = current / v, which keeps candidates on the positive reals.
    """
    if current <= 0.0 or proposal_variance <= 0.0:
        raise ValueError("current and proposal_variance must be > 0")
    shape = current * current / proposal_variance
    scale = proposal_variance / current
    for _ in range(10000):
        cand = rng.gamma(shape, scale)
        if cand > 0.0 and math.isfinite(cand):
            break
    else:
        raise RuntimeError("gamma proposal kept underflowing to zero")
    return cand, alpha_log_q_ratio(current, cand, proposal_variance)


def _accept(ln_lambda: float, rng) -> bool:
    # the uniform is always drawn so the random stream has a fixed layout
    u = rng.random()
    if math.isnan(ln_lambda):
        return False
    return u < math.exp(min(0.0, ln_lambda))


class _LikState:
    """Mutable sampler state with cached linear predictors.

    kind "gld": scale link sigma_i = exp(eta'_i), shape parameter alpha.
    kind "normal": variance link var_i = exp(eta'_i), no shape parameter.
    Candidate evaluations update only the quantities a block actually
    changes; full caches are recomputed periodically by refresh().
    """

    def __init__(self, X, y, beta, beta_prime, alpha, kind):
        self.X = np.asarray(X, float)
        self.y = np.asarray(y, float)
        self.n = self.y.size
        self.kind = kind
        self.colsum = self.X.sum(axis=0)
        self.beta = np.asarray(beta, float).copy()
        self.bp = np.asarray(beta_prime, float).copy()
        self.alpha = float(alpha) if alpha is not None else None
        self.refresh()

    def refresh(self):
        self.eta = self.X @ self.beta
        self.etap = self.X @ self.bp
        self.r = self.y - self.eta
        self.inv_scale = np.exp(np.clip(-self.etap, -_ETA_LIMIT, _ETA_LIMIT))
        self.s_etap = float(self.etap.sum())
        if self.kind == "gld":
            self.z = self.r * self.inv_scale
            self.s_z = float(self.z.sum())
            self.s_sp = float(np.logaddexp(0.0, -self.z).sum())
            self.loglik = self._gld_loglik(self.alpha, self.s_etap, self.s_z, self.s_sp)
        else:
            self.s_q = float((self.r * self.r * self.inv_scale).sum())
            self.loglik = self._normal_loglik(self.s_etap, self.s_q)

    def _gld_loglik(self, alpha, s_etap, s_z, s_sp):
        return self.n * math.log(alpha) - s_etap - s_z - (alpha + 1.0) * s_sp

    def _normal_loglik(self, s_etap, s_q):
        return -0.5 * (self.n * LOG_TWO_PI + s_etap + s_q)

    def current_vector(self) -> np.ndarray:
        parts = [self.beta, self.bp]
        if self.alpha is not None:
            parts.append([self.alpha])
        return np.concatenate(parts)

    def log_prior_value(self, prior: PriorSpec) -> float:
        v = prior.coef_variance
        coefs = np.concatenate([self.beta, self.bp])
        lp = (-0.5 * coefs.size * (LOG_TWO_PI + math.log(v))
              - 0.5 * float(coefs @ coefs) / v)
        if self.alpha is not None:
            lp += gamma_log_density(self.alpha, prior.alpha_shape, prior.alpha_rate)
        return lp

    def sweep(self, prior, step_sds, alpha_var, rng, accepts):
        """One Metropolis-within-Gibbs pass over every block."""
        X, p, v = self.X, self.beta.size, prior.coef_variance
        gld = self.kind == "gld"
        with np.errstate(over="ignore", invalid="ignore"):
            for j in range(p):
                delta = step_sds[j] * rng.standard_normal()
                cand = self.beta[j] + delta
                eta2 = self.eta + delta * X[:, j]
                r2 = self.y - eta2
                if gld:
                    z2 = r2 * self.inv_scale
                    s_z2 = float(z2.sum())
                    s_sp2 = float(np.logaddexp(0.0, -z2).sum())
                    ll2 = self._gld_loglik(self.alpha, self.s_etap, s_z2, s_sp2)
                else:
                    s_q2 = float((r2 * r2 * self.inv_scale).sum())
                    ll2 = self._normal_loglik(self.s_etap, s_q2)
                d_prior = (self.beta[j] ** 2 - cand ** 2) / (2.0 * v)
                if _accept(ll2 - self.loglik + d_prior, rng):
                    self.beta[j] = cand
                    self.eta, self.r, self.loglik = eta2, r2, ll2
                    if gld:
                        self.z, self.s_z, self.s_sp = z2, s_z2, s_sp2
                    else:
                        self.s_q = s_q2
                    accepts[j] += 1

            for j in range(p):
                delta = step_sds[p + j] * rng.standard_normal()
                cand = self.bp[j] + delta
                etap2 = self.etap + delta * X[:, j]
                s_etap2 = self.s_etap + delta * self.colsum[j]
                inv2 = np.exp(np.clip(-etap2, -_ETA_LIMIT, _ETA_LIMIT))
                if gld:
                    z2 = self.r * inv2
                    s_z2 = float(z2.sum())
                    s_sp2 = float(np.logaddexp(0.0, -z2).sum())
                    ll2 = self._gld_loglik(self.alpha, s_etap2, s_z2, s_sp2)
                else:
                    s_q2 = float((self.r * self.r * inv2).sum())
                    ll2 = self._normal_loglik(s_etap2, s_q2)
                d_prior = (self.bp[j] ** 2 - cand ** 2) / (2.0 * v)
                if _accept(ll2 - self.loglik + d_prior, rng):
                    self.bp[j] = cand
                    self.etap, self.inv_scale = etap2, inv2
                    self.s_etap, self.loglik = s_etap2, ll2
                    if gld:
                        self.z, self.s_z, self.s_sp = z2, s_z2, s_sp2
                    else:
                        self.s_q = s_q2
                    accepts[p + j] += 1

            if gld:
                cand, lqr = propose_alpha(self.alpha, alpha_var, rng)
                ll2 = self._gld_loglik(cand, self.s_etap, self.s_z, self.s_sp)
                d_prior = (gamma_log_density(cand, prior.alpha_shape, prior.alpha_rate)
                           - gamma_log_density(self.alpha, prior.alpha_shape,
                                               prior.alpha_rate))
                if _accept(ll2 - self.loglik + d_prior + lqr, rng):
                    self.alpha, self.loglik = cand, ll2
                    accepts[2 * p] += 1


def mh_step(ds: Dataset, psi: ParamVector, prior: PriorSpec,
            proposal: ProposalConfig, rng) -> tuple:
    """One full blockwise sweep from psi; returns the new state and
    per-block acceptance flags keyed by column name."""
    p = ds.p
    if proposal.coef_step_sd.size != 2 * p:
        raise ValueError("proposal needs one step size per coefficient (2p)")
    state = _LikState(ds.design, ds.response, psi.beta, psi.beta_prime,
                      psi.alpha, kind="gld")
    accepts = np.zeros(2 * p + 1, dtype=int)
    state.sweep(prior, proposal.coef_step_sd, proposal.alpha_proposal_variance,
                rng, accepts)
    names = coef_block_names(p) + ["alpha"]
    flags = {name: bool(accepts[i]) for i, name in enumerate(names)}
    return ParamVector(state.beta, state.bp, state.alpha), flags


def _ols_start(ds: Dataset, kind: str):
    """OLS coefficients with the residual spread seeding the scale intercept."""
    beta, *_ = np.linalg.lstsq(ds.design, ds.response, rcond=None)
    resid = ds.response - ds.design @ beta
    df = ds.n - ds.p
    rvar = float(resid @ resid) / df
    # a perfect (noise-free) fit leaves only rounding residue; flag it
    floor = (1e-10 * max(1.0, float(np.abs(ds.response).max()))) ** 2
    if not np.isfinite(rvar) or rvar <= floor:
        raise ChainInitError("degenerate residual variance at the OLS start")
    bp = np.zeros(ds.p)
    bp[0] = 0.5 * math.log(rvar) if kind == "gld" else math.log(rvar)
    return beta, bp, (1.0 if kind == "gld" else None)


def config_digest(prior: PriorSpec, proposal: ProposalConfig, n_iter: int,
                  burn_in: int, likelihood: str) -> str:
    payload = {
        "coef_variance": prior.coef_variance,
        "alpha_shape": prior.alpha_shape,
        "alpha_rate": prior.alpha_rate,
        "coef_step_sd": list(map(float, proposal.coef_step_sd)),
        "alpha_proposal_variance": proposal.alpha_proposal_variance,
        "adapt": proposal.adapt,
        "adapt_target_rate": proposal.adapt_target_rate,
        "adapt_window": proposal.adapt_window,
        "n_iter": n_iter,
        "burn_in": burn_in,
    }
    body = hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()
    tag = {"gld": "bglr", "normal": "bnr"}.get(likelihood, likelihood)
    return f"{tag}:{body[:16]}"


def run_chain(ds: Dataset, prior: PriorSpec, proposal: ProposalConfig,
              n_iter: int, burn_in: int, seed: int, likelihood: str = "gld",
              init=None, jitter: float = 0.0) -> Chain:
    """Run one chain and keep the post-burn-in draws.

    Deterministic given the seed.  With jitter > 0 every starting
    parameter is multiplied by 1 + jitter * u, u ~ U(-1, 1), which is
    how run_chains overdisperses starting points across chains.
    """
    if not 0 <= burn_in < n_iter:
        raise ValueError("need 0 <= burn_in < n_iter")
    kind = "gld" if likelihood == "gld" else "normal"
    rng = np.random.default_rng(seed)

    if init is None:
        beta, bp, alpha = _ols_start(ds, kind)
    else:
        beta, bp, alpha = (np.asarray(init[0], float).copy(),
                           np.asarray(init[1], float).copy(), init[2])
    p = ds.p
    n_blocks = 2 * p + (1 if kind == "gld" else 0)
    if proposal.coef_step_sd.size != 2 * p:
        raise ValueError("proposal needs one step size per coefficient (2p)")
    if jitter > 0.0:
        factors = 1.0 + jitter * rng.uniform(-1.0, 1.0, size=n_blocks)
        beta = beta * factors[:p]
        bp = bp * factors[p:2 * p]
        if kind == "gld":
            alpha = alpha * factors[2 * p]

    state = _LikState(ds.design, ds.response, beta, bp, alpha, kind)
    if not math.isfinite(state.loglik + state.log_prior_value(prior)):
        raise ChainInitError("starting point has -inf posterior")
    start_point = state.current_vector()

    step_sds = proposal.coef_step_sd.astype(float).copy()
    alpha_var = proposal.alpha_proposal_variance
    target, window = proposal.adapt_target_rate, proposal.adapt_window

    n_keep = n_iter - burn_in
    draws = np.empty((n_keep, n_blocks))
    lp_trace = np.empty(n_keep)
    ll_trace = np.empty(n_keep)
    kept_accepts = np.zeros(n_blocks, dtype=int)
    win_accepts = np.zeros(n_blocks, dtype=int)
    sweep_accepts = np.zeros(n_blocks, dtype=int)

    for t in range(1, n_iter + 1):
        sweep_accepts[:] = 0
        state.sweep(prior, step_sds, alpha_var, rng, sweep_accepts)
        if t % _REFRESH_EVERY == 0:
            state.refresh()
        if t <= burn_in:
            if proposal.adapt:
                win_accepts += sweep_accepts
                if t % window == 0:
                    k = t // window
                    gain = 2.0 * k ** -0.6
                    rates = win_accepts / window
                    step_sds *= np.exp(gain * (rates[:2 * p] - target))
                    if kind == "gld":
                        alpha_var *= math.exp(2.0 * gain * (rates[2 * p] - target))
                    win_accepts[:] = 0
        else:
            i = t - burn_in - 1
            draws[i] = state.current_vector()
            ll_trace[i] = state.loglik
            lp_trace[i] = state.loglik + state.log_prior_value(prior)
            kept_accepts += sweep_accepts

    columns = tuple(coef_block_names(p) + (["alpha"] if kind == "gld" else []))
    rates = {name: kept_accepts[i] / n_keep for i, name in enumerate(columns)}
    return Chain(
        draws=draws,
        log_posterior_trace=lp_trace,
        log_likelihood_trace=ll_trace,
        acceptance_rate_by_block=rates,
        seed=seed,
        config_digest=config_digest(prior, proposal, n_iter, burn_in, likelihood),
        columns=columns,
        start_point=start_point,
    )


def run_chains(ds: Dataset, prior: PriorSpec, proposal: ProposalConfig,
               n_iter: int, burn_in: int, n_chains: int, base_seed: int,
               likelihood: str = "gld") -> list:
    """Independent chains seeded base_seed + k with overdispersed starts."""
    if n_chains < 1:
        raise ValueError("n_chains must be >= 1")
    return [
        run_chain(ds, prior, proposal, n_iter, burn_in, seed=base_seed + k,
                  likelihood=likelihood, jitter=0.5)
        for k in range(n_chains)
    ]


def random_walk_chain(log_target, init, step_sd, n_iter: int, burn_in: int,
                      seed: int, adapt: bool = True, target_rate: float = 0.3,
                      window: int = 200) -> tuple:
    """Blockwise normal random-walk Metropolis on an arbitrary log target.

    Validation workhorse: lets the accept/reject machinery be checked
    against closed-form targets.  Returns (draws, acceptance_rates).
    """
    if not 0 <= burn_in < n_iter:
        raise ValueError("need 0 <= burn_in < n_iter")
    rng = np.random.default_rng(seed)
    x = np.asarray(init, dtype=float).copy()
    k = x.size
    sds = np.broadcast_to(np.asarray(step_sd, dtype=float), (k,)).copy()
    if np.any(sds <= 0.0):
        raise ValueError("step sizes must be > 0")
    lt = float(log_target(x))
    if not math.isfinite(lt):
        raise ChainInitError("starting point has -inf target density")

    n_keep = n_iter - burn_in
    draws = np.empty((n_keep, k))
    kept = np.zeros(k, dtype=int)
    win = np.zeros(k, dtype=int)
    for t in range(1, n_iter + 1):
        for j in range(k):
            old = x[j]
            x[j] = old + sds[j] * rng.standard_normal()
            lt2 = float(log_target(x))
            if _accept(lt2 - lt, rng):
                lt = lt2
                if t > burn_in:
                    kept[j] += 1
                else:
                    win[j] += 1
            else:
                x[j] = old
        if adapt and t <= burn_in and t % window == 0:
            gain = 2.0 * (t // window) ** -0.6
            sds *= np.exp(gain * (win / window - target_rate))
            win[:] = 0
        if t > burn_in:
            draws[t - burn_in - 1] = x
    return draws, kept / n_keep


def write_chain_csv(chain: Chain, path):
    """One retained draw per row: parameter columns, log_post, model tag."""
    header = list(chain.columns) + ["log_post", "model"]
    model = chain.model
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row, lp in zip(chain.draws, chain.log_posterior_trace):
            cells = [repr(float(v)) for v in row] + [repr(float(lp)), model]
            fh.write(",".join(cells) + "\n")
