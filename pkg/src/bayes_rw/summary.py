"""
summary.py
----------
Posterior summaries, convergence diagnostics and plot data for the
random-walk model, plus the conversions between the estimates table and a
PanelData.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import arviz as az
import numpy as np
import pandas as pd

from src.bayes_rw.model import PanelData
from src.bayes_rw.sampler import HYPERPARAMETERS, PosteriorDraws
from src.bayes_rw.truncgamma import trunc_gamma_sample

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ("household_id", "month", "post_mean", "ci_lo", "ci_hi")
DIAGNOSTIC_COLUMNS = ("parameter", "mean", "sd", "ci_lo", "ci_hi", "rhat", "ess")


@dataclass
class PosteriorSummary:
    cells: pd.DataFrame
    diagnostics: pd.DataFrame

    @property
    def max_rhat(self) -> float:
        return float(self.diagnostics["rhat"].max())


def panel_from_estimates(estimates: pd.DataFrame, value: str = "g_hat") -> PanelData:
    """
    Pivot an estimates table into a household x month panel.

    Months are the sorted union over households; absent or missing estimates
    become NaN cells.
    """
    if estimates.empty:
        raise ValueError("no estimates to build a panel from")
    table = estimates.pivot_table(
        index="household_id", columns="month", values=value, aggfunc="first", dropna=False
    )
    table = table.sort_index(axis=0).sort_index(axis=1)
    return PanelData(
        y=table.to_numpy(dtype=float),
        household_ids=[str(h) for h in table.index],
        months=[str(m) for m in table.columns],
    )


def _rhat_ess(chains: np.ndarray) -> Tuple[float, float]:
    """Rank-normalized split R-hat and bulk ESS of a (chain, draw) array."""
    if np.ptp(chains) == 0:
        return 1.0, float(chains.size)
    return float(az.rhat(chains, method="rank")), float(az.ess(chains, method="bulk"))


def _interval(samples: np.ndarray, level: float, axis=0):
    tail = (1.0 - level) / 2.0
    return np.quantile(samples, [tail, 1.0 - tail], axis=axis)


def summarize(draws: PosteriorDraws, level: float = 0.95) -> PosteriorSummary:
    """
    Posterior mean and equal-tailed credible interval of every mu_it, and
    mean/sd/interval/R-hat/ESS of the hyperparameters and intercepts.

    Raises:
        ValueError: fewer than 2 chains.
    """
    if draws.n_chains < 2:
        raise ValueError("summaries need at least 2 chains")

    mu = draws.mu()
    pooled = mu.reshape(-1, *mu.shape[2:])
    lo, hi = _interval(pooled, level)
    mean = pooled.mean(axis=0)

    n, t_len = mean.shape
    cells = pd.DataFrame(
        {
            "household_id": np.repeat(draws.household_ids, t_len),
            "month": np.tile(draws.months, n),
            "post_mean": mean.ravel(),
            "ci_lo": lo.ravel(),
            "ci_hi": hi.ravel(),
        }
    )

    rows = []
    scalars = [(name, draws.scalar(name)) for name in HYPERPARAMETERS]
    scalars += [(f"beta[{hid}]", draws.beta[:, :, i]) for i, hid in enumerate(draws.household_ids)]
    for name, chains in scalars:
        rhat, ess = _rhat_ess(chains)
        q_lo, q_hi = _interval(chains.ravel(), level)
        rows.append(
            {
                "parameter": name,
                "mean": float(chains.mean()),
                "sd": float(chains.std(ddof=1)) if chains.size > 1 else 0.0,
                "ci_lo": float(q_lo),
                "ci_hi": float(q_hi),
                "rhat": rhat,
                "ess": ess,
            }
        )
    diagnostics = pd.DataFrame(rows, columns=list(DIAGNOSTIC_COLUMNS))
    worst = diagnostics["rhat"].max()
    if worst >= 1.05:
        logger.warning(f"Max R-hat {worst:.3f} >= 1.05; chains may not have mixed.")
    return PosteriorSummary(cells=cells, diagnostics=diagnostics)


def posterior_predictive(
    draws: PosteriorDraws,
    rng: np.random.Generator,
    max_draws: Optional[int] = 1000,
) -> np.ndarray:
    """
    Replicated panels Y_rep ~ TruncGamma(mu_it, tau), one per posterior draw.

    Returns:
        (S, N, T) array, S = min(total draws, max_draws).
    """
    mu = draws.mu().reshape(-1, len(draws.household_ids), len(draws.months))
    tau = draws.tau.reshape(-1)
    if max_draws is not None and mu.shape[0] > max_draws:
        keep = np.sort(rng.choice(mu.shape[0], size=max_draws, replace=False))
        mu, tau = mu[keep], tau[keep]
    return trunc_gamma_sample(mu, tau[:, None, None], rng)


def plot_data(
    panel: PanelData,
    summary: PosteriorSummary,
    replicated: Optional[np.ndarray] = None,
    level: float = 0.95,
) -> pd.DataFrame:
    """
    Tidy rows (household_id, month, g_hat, post_mean, ci_lo, ci_hi[, pp_lo,
    pp_hi]) for the estimate-with-uncertainty-over-time plot.
    """
    frame = summary.cells.copy()
    frame.insert(2, "g_hat", panel.y.ravel())
    if replicated is not None:
        lo, hi = _interval(replicated, level)
        frame["pp_lo"] = lo.ravel()
        frame["pp_hi"] = hi.ravel()
    return frame


def write_draws(draws: PosteriorDraws, path: Union[str, Path]) -> Path:
    """Long-format CSV ``chain,iteration,parameter,value``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n_chains, n_draws = draws.n_chains, draws.n_draws
    chain_idx = np.repeat(np.arange(n_chains), n_draws)
    iter_idx = np.tile(np.arange(n_draws), n_chains)

    frames = []
    for name in HYPERPARAMETERS:
        frames.append(pd.DataFrame({"chain": chain_idx, "iteration": iter_idx, "parameter": name,
                                    "value": draws.scalar(name).ravel()}))
    for i, hid in enumerate(draws.household_ids):
        frames.append(pd.DataFrame({"chain": chain_idx, "iteration": iter_idx, "parameter": f"beta[{hid}]",
                                    "value": draws.beta[:, :, i].ravel()}))
        for t, month in enumerate(draws.months):
            frames.append(pd.DataFrame({"chain": chain_idx, "iteration": iter_idx,
                                        "parameter": f"w[{hid},{month}]",
                                        "value": draws.w[:, :, i, t].ravel()}))
    pd.concat(frames, ignore_index=True).to_csv(path, index=False)
    logger.info(f"Wrote posterior draws to {path}")
    return path
