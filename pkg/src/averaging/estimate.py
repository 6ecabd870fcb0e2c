"""
estimate.py
-----------
Per household-month profile estimate: full structure x G grid, BIC weights,
model-averaged G_hat and the within/between distance ratio of the BIC-best
partition.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional

import numpy as np
import pandas as pd

from src.averaging.quality import wb_ratio
from src.averaging.weights import COMPONENT_GRID, BicMatrix, estimate_g, weight_transform
from src.config import GridSettings
from src.features.matrix import clustering_input
from src.gmm.em import MixtureFit, fit_grid

logger = logging.getLogger(__name__)

ESTIMATE_COLUMNS = (
    "household_id",
    "month",
    "g_hat",
    "best_structure",
    "best_g",
    "wb_ratio",
    "n_units",
    "capped",
)


@dataclass
class ProfileEstimate:
    household_id: str
    month: str
    g_hat: float
    best_structure: str
    best_g: int
    wb_ratio: Optional[float]
    n_units: int
    capped: bool = False
    n_failed: int = 0
    bic: Optional[BicMatrix] = field(default=None, repr=False)

    def to_row(self) -> dict:
        return {
            "household_id": self.household_id,
            "month": self.month,
            "g_hat": self.g_hat,
            "best_structure": self.best_structure,
            "best_g": self.best_g,
            "wb_ratio": self.wb_ratio,
            "n_units": self.n_units,
            "capped": self.capped,
        }


def component_cap(n: int, g_max: int) -> int:
    """Largest G tried for n observations: n - 1 when n <= 15, never below 1."""
    if n <= 15:
        return max(1, min(g_max, n - 1))
    return g_max


def estimate_household_month(
    values: np.ndarray,
    household_id: str = "",
    month: str = "",
    settings: Optional[GridSettings] = None,
    seed: int = 0,
    standardize_columns: bool = True,
    n_jobs: int = 1,
) -> ProfileEstimate:
    """
    Estimate the number of viewing profiles of one household-month.

    Args:
        values:              (units, p) feature or factor-score matrix.
        household_id, month: Labels copied onto the estimate.
        settings:            Grid bounds, structures and EM budgets.
        seed:                Seed for the grid's per-cell seeds.
        standardize_columns: Z-score columns before clustering.
        n_jobs:              Worker processes for the grid.

    Returns:
        ProfileEstimate; ``wb_ratio`` is None when the best fit has one cluster.

    Raises:
        ValueError: fewer than 2 rows, no varying column, or no valid fit.
    """
    settings = settings or GridSettings()
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    if n < 2:
        raise ValueError("insufficient observations")

    x = clustering_input(values, standardize_columns=standardize_columns)
    if x.shape[1] == 0:
        raise ValueError("no varying features")

    cap = component_cap(n, settings.g_max)
    capped = cap < settings.g_max
    g_values = range(min(settings.g_min, cap), cap + 1)

    fits = fit_grid(
        x,
        structures=settings.structures,
        g_values=g_values,
        seed=seed,
        n_init=settings.n_init,
        max_iter=settings.max_iter,
        tol=settings.tol,
        n_jobs=n_jobs,
    )
    failed = [f for f in fits if f.failed]
    if failed:
        logger.warning(
            f"{household_id}/{month}: {len(failed)}/{len(fits)} fit(s) failed and were masked."
        )

    bic = BicMatrix.from_fits(fits, structures=settings.structures, components=COMPONENT_GRID)
    weights = weight_transform(bic)
    g_hat = estimate_g(weights)
    best_structure, best_g = bic.best()

    ratio: Optional[float] = None
    best_fit = _find_fit(fits, best_structure, best_g)
    try:
        ratio = wb_ratio(x, best_fit.labels)
    except ValueError:
        logger.debug(f"{household_id}/{month}: ratio undefined for G={best_g}.")

    logger.info(
        f"{household_id}/{month}: G_hat={g_hat:.3f} best={best_structure}/{best_g} "
        f"(n={n}{', capped' if capped else ''})"
    )
    return ProfileEstimate(
        household_id=household_id,
        month=month,
        g_hat=g_hat,
        best_structure=best_structure,
        best_g=best_g,
        wb_ratio=ratio,
        n_units=n,
        capped=capped,
        n_failed=len(failed),
        bic=bic,
    )


def _find_fit(fits: Iterable[MixtureFit], structure: str, g: int) -> MixtureFit:
    for fit in fits:
        if fit.structure == structure and fit.n_components == g:
            return fit
    raise ValueError(f"no fit for {structure}/{g}")


def estimates_to_frame(estimates: Iterable[ProfileEstimate]) -> pd.DataFrame:
    rows = [e.to_row() for e in estimates]
    frame = pd.DataFrame(rows, columns=list(ESTIMATE_COLUMNS))
    return frame.sort_values(["household_id", "month"], kind="stable").reset_index(drop=True)


def read_estimates(path) -> pd.DataFrame:
    """Read an estimates CSV written by the estimate stage."""
    frame = pd.read_csv(path, dtype={"household_id": str, "month": str})
    missing = [c for c in ESTIMATE_COLUMNS if c not in frame.columns]
    if missing:
        raise ValueError(f"estimates file {path} lacks column(s) {missing}")
    return frame


def mean_absolute_error(estimates: pd.DataFrame, truth: pd.DataFrame) -> float:
    """MAE of g_hat against a ground-truth table (household_id, month, true_k)."""
    merged = estimates.merge(truth, on=["household_id", "month"], how="inner")
    if merged.empty:
        return math.nan
    return float(np.mean(np.abs(merged["g_hat"] - merged["true_k"])))
