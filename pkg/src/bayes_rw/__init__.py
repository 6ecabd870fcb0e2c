from .model import (
    BETA0_PRIOR_VAR,
    SIGMA2_UPPER,
    TAU_UPPER,
    ModelState,
    PanelData,
    log_posterior,
)
from .sampler import HYPERPARAMETERS, InitializationError, PosteriorDraws, chain_seeds, run_mcmc
from .summary import (
    PosteriorSummary,
    panel_from_estimates,
    plot_data,
    posterior_predictive,
    summarize,
    write_draws,
)
from .truncgamma import trunc_gamma_logpdf, trunc_gamma_mean, trunc_gamma_sample

__all__ = [
    "BETA0_PRIOR_VAR",
    "HYPERPARAMETERS",
    "SIGMA2_UPPER",
    "TAU_UPPER",
    "InitializationError",
    "ModelState",
    "PanelData",
    "PosteriorDraws",
    "PosteriorSummary",
    "chain_seeds",
    "log_posterior",
    "panel_from_estimates",
    "plot_data",
    "posterior_predictive",
    "run_mcmc",
    "summarize",
    "trunc_gamma_logpdf",
    "trunc_gamma_mean",
    "trunc_gamma_sample",
    "write_draws",
]
