"""
reporting.py
------------
Tables comparing estimates obtained on the raw features with those obtained
on factor scores, and tidy plot data (G_hat vs ratio scatter, monthly ECDF).
"""

from typing import Dict

import numpy as np
import pandas as pd


def _stack(estimates: Dict[str, pd.DataFrame]) -> pd.DataFrame:
    frames = []
    for space, frame in estimates.items():
        frame = frame.copy()
        frame.insert(0, "input_space", space)
        frames.append(frame)
    if not frames:
        return pd.DataFrame(columns=["input_space", "household_id", "month", "g_hat", "wb_ratio"])
    return pd.concat(frames, ignore_index=True)


def compare_input_spaces(estimates: Dict[str, pd.DataFrame]) -> pd.DataFrame:
    """
    Mean and sd of G_hat and of the within/between ratio per input space.

    Args:
        estimates: input-space label -> estimates table.
    """
    stacked = _stack(estimates)
    rows = []
    for space, group in stacked.groupby("input_space", sort=False):
        ratios = pd.to_numeric(group["wb_ratio"], errors="coerce").dropna()
        rows.append(
            {
                "input_space": space,
                "n_estimates": int(len(group)),
                "mean_g_hat": float(group["g_hat"].mean()),
                "sd_g_hat": float(group["g_hat"].std(ddof=1)) if len(group) > 1 else np.nan,
                "mean_wb_ratio": float(ratios.mean()) if len(ratios) else np.nan,
                "sd_wb_ratio": float(ratios.std(ddof=1)) if len(ratios) > 1 else np.nan,
            }
        )
    return pd.DataFrame(rows)


def scatter_data(estimates: Dict[str, pd.DataFrame]) -> pd.DataFrame:
    """Rows (input_space, household_id, month, g_hat, wb_ratio)."""
    stacked = _stack(estimates)
    return stacked[["input_space", "household_id", "month", "g_hat", "wb_ratio"]].reset_index(drop=True)


def ecdf_data(estimates: Dict[str, pd.DataFrame]) -> pd.DataFrame:
    """Empirical CDF of G_hat per (input space, month): P(G_hat <= g)."""
    stacked = _stack(estimates)
    frames = []
    for (space, month), group in stacked.groupby(["input_space", "month"], sort=True):
        g = np.sort(group["g_hat"].to_numpy(dtype=float))
        ecdf = np.searchsorted(g, g, side="right") / g.size
        frames.append(
            pd.DataFrame({"input_space": space, "month": month, "g_hat": g, "ecdf": ecdf})
        )
    if not frames:
        return pd.DataFrame(columns=["input_space", "month", "g_hat", "ecdf"])
    return pd.concat(frames, ignore_index=True)
