"""
panel.py
--------
Forward simulation of the truncated-Gamma random-walk model.
"""

import logging
from dataclasses import dataclass

import numpy as np

from src.bayes_rw.model import SIGMA2_UPPER, TAU_UPPER, PanelData
from src.bayes_rw.truncgamma import trunc_gamma_sample

logger = logging.getLogger(__name__)


@dataclass
class PanelTruth:
    beta0: float
    sigma_beta: float
    sigma_xi: float
    tau: float
    beta: np.ndarray
    w: np.ndarray

    @property
    def mu(self) -> np.ndarray:
        return np.exp(self.beta[:, None] + self.w)

    @property
    def hyperparameters(self) -> dict:
        """True values on the sampler's scale (variances, not sds)."""
        return {
            "beta0": self.beta0,
            "sigma2_beta": self.sigma_beta ** 2,
            "sigma2_xi": self.sigma_xi ** 2,
            "tau": self.tau,
        }


def gen_panel(
    n_households: int,
    n_months: int,
    beta0: float = 1.0,
    sigma_beta: float = 0.3,
    sigma_xi: float = 0.2,
    tau: float = 20.0,
    missing_rate: float = 0.0,
    seed: int = 0,
) -> tuple:
    """
    Draw beta_i, the walks w_it (w_i0 = 0) and y_it ~ TruncGamma(mu_it, tau),
    then blank cells independently with probability ``missing_rate``.

    Hyperparameters outside the prior support are accepted (with a warning)
    so that limiting cases can be simulated.

    Returns:
        (PanelData, PanelTruth)

    Raises:
        ValueError: non-positive sizes or tau, negative sds, rate outside [0, 1].
    """
    if n_households < 1 or n_months < 1:
        raise ValueError("panel needs at least one household and one month")
    if sigma_beta < 0 or sigma_xi < 0 or tau <= 0:
        raise ValueError("sds must be nonnegative and tau positive")
    if not 0.0 <= missing_rate <= 1.0:
        raise ValueError("missing_rate must lie in [0, 1]")
    if sigma_beta ** 2 >= SIGMA2_UPPER or sigma_xi ** 2 >= SIGMA2_UPPER or tau >= TAU_UPPER:
        logger.warning("gen_panel: hyperparameters lie outside the prior support.")

    rng = np.random.default_rng(seed)
    beta = beta0 + sigma_beta * rng.standard_normal(n_households)
    w = np.cumsum(sigma_xi * rng.standard_normal((n_households, n_months)), axis=1)
    truth = PanelTruth(beta0=beta0, sigma_beta=sigma_beta, sigma_xi=sigma_xi, tau=tau, beta=beta, w=w)

    y = trunc_gamma_sample(truth.mu, tau, rng)
    y = np.asarray(y, dtype=float).reshape(n_households, n_months)
    y[rng.random(y.shape) < missing_rate] = np.nan
    return PanelData(y=y), truth
