"""Extreme-value estimation of CoVaR for a system given an institution in distress."""

from .backtest import (
    CoverageResult,
    ScoreSeries,
    comparative_backtest,
    pool_normalized_scores,
    quantile_score,
    uc_test_covar,
    uc_test_var,
)
from .core import (
    CovarConfig,
    CovarEstimate,
    RiskLevel,
    estimate_covar,
    exact_eta_p,
    solve_eta_star,
    true_covar_oracle,
)
from .empirical import LossPairSample, compute_ranks, r_hat, tdc_hat
from .exceptions import (
    BracketExceededError,
    CovarError,
    DomainError,
    FitError,
    NoSolutionError,
    NumericError,
)
from .garch import GarchFit, fit_ar_garch, realized_residuals, rolling_forecast, skew_t_logpdf
from .generative import GenerativeModel, Margins, sample_bivariate_evd, sample_bivariate_t
from .mestimator import MEstimatorFit, TestFunctionSet, empirical_phi, fit_tdf, phi
from .simulation import McStudyConfig, mc_study
from .tdf import Family, TdfModel, eval_r, eval_r_partial2, r_one_eta_curve
from .univariate import hill, select_k_bootstrap, var_sensitivity, weissman_quantile

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
