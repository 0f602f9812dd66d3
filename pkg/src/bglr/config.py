"""Run configuration: sampler protocol, priors, proposals, model selection.

Configs can be loaded from a flat key = value text file ('#' starts a
comment); command-line flags override file values.  The resolved config
is echoed into the run manifest so a run can be reproduced exactly.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields

from .mcmc import PriorSpec, ProposalConfig

__all__ = ["RunConfig", "parse_config_file"]

_ALL_MODELS = ("bglr", "bnr", "slr")


@dataclass
class RunConfig:
    iterations: int = 20000
    burn_in: int = 10000
    chains: int = 4
    seed: int = 0
    coef_prior_variance: float = 1e4
    alpha_prior_shape: float = 1.0
    alpha_prior_rate: float = 1.0
    coef_step_sd: float = 0.1
    alpha_proposal_variance: float = 0.1
    adapt: bool = True
    adapt_target_rate: float = 0.3
    adapt_window: int = 200
    models: tuple = _ALL_MODELS
    threads: int = 0           # 0 means "use all available processors"
    day_start: int = 0         # 0 means "from the first day"
    day_end: int = 0           # 0 means "to the last day"

    def __post_init__(self):
        if isinstance(self.models, str):
            self.models = tuple(m.strip() for m in self.models.split(",") if m.strip())
        self.models = tuple(self.models)
        unknown = set(self.models) - set(_ALL_MODELS)
        if unknown:
            raise ValueError(f"unknown models: {sorted(unknown)}")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("need 0 <= burn_in < iterations")
        if self.chains < 1:
            raise ValueError("chains must be >= 1")
        if self.threads < 0:
            raise ValueError("threads must be >= 0")

    def resolved_threads(self) -> int:
        return self.threads if self.threads > 0 else (os.cpu_count() or 1)

    def prior(self) -> PriorSpec:
        return PriorSpec(coef_variance=self.coef_prior_variance,
                         alpha_shape=self.alpha_prior_shape,
                         alpha_rate=self.alpha_prior_rate)

    def proposal(self, n_coef: int) -> ProposalConfig:
        return ProposalConfig.default(
            n_coef, initial_sd=self.coef_step_sd,
            alpha_proposal_variance=self.alpha_proposal_variance,
            adapt=self.adapt, adapt_target_rate=self.adapt_target_rate,
            adapt_window=self.adapt_window)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["models"] = list(self.models)
        return d


_BOOL_WORDS = {"true": True, "1": True, "yes": True,
               "false": False, "0": False, "no": False}


def _coerce(name: str, kind, raw: str):
    if kind is bool:
        word = raw.strip().lower()
        if word not in _BOOL_WORDS:
            raise ValueError(f"config key {name}: expected a boolean, got {raw!r}")
        return _BOOL_WORDS[word]
    if kind is tuple:
        return tuple(m.strip() for m in raw.split(",") if m.strip())
    return kind(raw)


def parse_config_file(path) -> dict:
    """Read key = value pairs, typed against RunConfig's fields."""
    types = {f.name: (bool if f.type == "bool" else
                      int if f.type == "int" else
                      float if f.type == "float" else tuple)
             for f in fields(RunConfig)}
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = (part.strip() for part in text.split("=", 1))
            if key not in types:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            try:
                out[key] = _coerce(key, types[key], raw)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return out
