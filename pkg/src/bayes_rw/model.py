"""
model.py
--------
Hierarchical truncated-Gamma random-walk model for the monthly profile
estimates Y_it (household i, month t):

    Y_it     ~ TruncGamma[1, inf)(shape tau, rate tau / mu_it)
    log mu_it = beta_i + w_it
    beta_i   ~ N(beta_0, sigma2_beta)
    w_it     ~ N(w_i,t-1, sigma2_xi),  w_i0 = 0

Priors: beta_0 ~ N(0, 100) (variance), sigma2_beta ~ U(0, 100),
sigma2_xi ~ U(0, 100), tau ~ U(0, 50). Missing Y_it (NaN) contribute no
likelihood term; their w_it is still part of the walk.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np

from src.bayes_rw.truncgamma import trunc_gamma_logpdf

logger = logging.getLogger(__name__)

BETA0_PRIOR_VAR = 100.0
SIGMA2_UPPER = 100.0
TAU_UPPER = 50.0

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class PanelData:
    """(N households x T months) profile estimates; NaN marks a missing cell."""

    y: np.ndarray
    household_ids: List[str] = field(default_factory=list)
    months: List[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.y = np.asarray(self.y, dtype=float)
        if self.y.ndim != 2 or self.y.shape[0] < 1 or self.y.shape[1] < 1:
            raise ValueError("panel must be a non-empty N x T matrix")
        observed = self.y[~np.isnan(self.y)]
        if np.any(~np.isfinite(observed)) or np.any(observed < 1.0):
            raise ValueError("observed panel values must be finite and >= 1")
        if not self.household_ids:
            self.household_ids = [str(i) for i in range(self.n_households)]
        if not self.months:
            self.months = [str(t) for t in range(self.n_months)]
        if len(self.household_ids) != self.n_households or len(self.months) != self.n_months:
            raise ValueError("panel labels do not match its shape")

    @property
    def n_households(self) -> int:
        return int(self.y.shape[0])

    @property
    def n_months(self) -> int:
        return int(self.y.shape[1])

    @property
    def observed(self) -> np.ndarray:
        return ~np.isnan(self.y)


@dataclass
class ModelState:
    beta0: float
    sigma2_beta: float
    sigma2_xi: float
    tau: float
    beta: np.ndarray
    w: np.ndarray

    @property
    def mu(self) -> np.ndarray:
        return np.exp(self.beta[:, None] + self.w)

    def copy(self) -> "ModelState":
        return ModelState(
            beta0=self.beta0,
            sigma2_beta=self.sigma2_beta,
            sigma2_xi=self.sigma2_xi,
            tau=self.tau,
            beta=self.beta.copy(),
            w=self.w.copy(),
        )


# ---------------------------------------------------------------------------
# Term-level densities (shared with the sampler)
# ---------------------------------------------------------------------------


def normal_logpdf(x, mean, var) -> np.ndarray:
    return -0.5 * (_LOG_2PI + np.log(var) + (np.asarray(x) - mean) ** 2 / var)


def in_support(state: ModelState) -> bool:
    return (
        0.0 < state.sigma2_beta < SIGMA2_UPPER
        and 0.0 < state.sigma2_xi < SIGMA2_UPPER
        and 0.0 < state.tau < TAU_UPPER
        and np.isfinite(state.beta0)
    )


def loglik_cells(y: np.ndarray, observed: np.ndarray, log_mu: np.ndarray, tau: float) -> np.ndarray:
    """Per-cell truncated-Gamma log-likelihood; 0 on missing cells."""
    out = np.zeros(np.broadcast_shapes(y.shape, log_mu.shape))
    if np.any(observed):
        mu = np.exp(np.broadcast_to(log_mu, out.shape)[observed])
        out[observed] = trunc_gamma_logpdf(y[observed], mu, tau)
    return out


def walk_increments(w: np.ndarray) -> np.ndarray:
    """w_it - w_i,t-1 with the anchor w_i0 = 0."""
    return np.diff(w, axis=1, prepend=0.0)


def log_prior(state: ModelState) -> float:
    if not in_support(state):
        return -np.inf
    return float(
        normal_logpdf(state.beta0, 0.0, BETA0_PRIOR_VAR)
        - 2.0 * math.log(SIGMA2_UPPER)
        - math.log(TAU_UPPER)
    )


def log_posterior(state: ModelState, panel: PanelData) -> float:
    """
    Unnormalized log posterior density.

    Returns:
        -inf when the state lies outside the prior support.
    """
    prior = log_prior(state)
    if not np.isfinite(prior):
        return -np.inf
    loglik = loglik_cells(panel.y, panel.observed, state.beta[:, None] + state.w, state.tau).sum()
    walk = normal_logpdf(walk_increments(state.w), 0.0, state.sigma2_xi).sum()
    intercepts = normal_logpdf(state.beta, state.beta0, state.sigma2_beta).sum()
    return float(loglik + walk + intercepts + prior)
