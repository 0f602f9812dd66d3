"""Heteroscedastic Bayesian generalized logistic regression.

Library + CLI for fitting a continuous response whose location and log
scale are both linear in the covariates and whose residuals follow the
type I generalized logistic distribution, sampled with random-walk
Metropolis-Hastings.  Includes normal-model baselines, Gelman-Rubin and
DIC diagnostics, and a batch pipeline fitting daily power-law scaling
models to regional count data.
"""

__version__ = "0.1.0"

from .baselines import SlrFit, bnr_fit, bnr_log_likelihood, slr_fit
from .config import RunConfig
from .diagnostics import (DicResult, PosteriorSummary, RhatReport, dic,
                          dic_difference, gelman_rubin, summarize)
from .gld import (CollapseKind, FitStatus, GldMoments, GldParams, mle_fit,
                  mom_estimate, moments)
from .mcmc import Chain, ChainInitError, PriorSpec, ProposalConfig, run_chain, run_chains
from .pipeline import (DayDataset, DayFitRecord, FitResult, RegionRecord,
                       build_day_dataset, fit_all_days, fit_day, load_regions,
                       simulate_day)
from .regression import Dataset, ParamVector
