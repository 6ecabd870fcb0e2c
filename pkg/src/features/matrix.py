"""
matrix.py
---------
Builds the (units x 17) observation matrix of a household-month and the
scaling helpers applied before clustering.
"""

import logging
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd

from src.ingest.sessions import HouseholdMonth, SessionRecord
from src.features.stats import stat_seven
from src.features.transitions import transition_features
from src.features.units import DAY, split_units

logger = logging.getLogger(__name__)

_STAT_LABELS = (
    ("mean", "Average"),
    ("median", "Median"),
    ("sd", "Sd"),
    ("skewness", "Skewness"),
    ("kurtosis", "Kurtosis"),
    ("q025", "2.5% quantile"),
    ("q975", "97.5% quantile"),
)

# (column name, data source, row label) in display order
FEATURE_LAYOUT: Tuple[Tuple[str, str, str], ...] = (
    ("transitions_number", "Transitions", "Number"),
    ("transitions_channels", "Transitions", "Channels"),
    ("transitions_absorbing", "Transitions", "Absorbing states"),
    *((f"ratio_{key}", "Program ratio", label) for key, label in _STAT_LABELS),
    *((f"duration_{key}", "Session duration", label) for key, label in _STAT_LABELS),
)

FEATURE_NAMES: Tuple[str, ...] = tuple(name for name, _, _ in FEATURE_LAYOUT)
KEY_COLUMNS = ("household_id", "month", "unit")


@dataclass
class FeatureMatrix:
    """Observation matrix of one household-month (one row per unit)."""

    household_id: str
    month: str
    units: List[int]
    values: np.ndarray
    dropped_units: List[int] = field(default_factory=list)

    @property
    def n_units(self) -> int:
        return int(self.values.shape[0])

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.values, columns=list(FEATURE_NAMES))
        frame.insert(0, "unit", self.units)
        frame.insert(0, "month", self.month)
        frame.insert(0, "household_id", self.household_id)
        return frame


@dataclass(frozen=True)
class Scaling:
    """Per-column centring/scaling recorded by standardize()."""

    mean: np.ndarray
    sd: np.ndarray
    constant: np.ndarray


def unit_features(sessions: List[SessionRecord]) -> np.ndarray:
    """
    The 17 features of one aggregation unit.

    Raises:
        ValueError: no sessions, or no program-watch entries in the unit.
    """
    n_transitions, n_channels, n_absorbing = transition_features(sessions)
    ratios = [r for s in sessions for r in s.ratios]
    if not ratios:
        raise ValueError("unit has no program watches")
    durations = [s.duration_seconds for s in sessions]
    return np.array(
        [
            n_transitions,
            n_channels,
            n_absorbing,
            *stat_seven(ratios).as_tuple(),
            *stat_seven(durations).as_tuple(),
        ],
        dtype=float,
    )


def build_feature_matrix(hm: HouseholdMonth, aggregation: str = DAY) -> FeatureMatrix:
    """
    Compute one 17-feature row per aggregation unit of a household-month.

    Args:
        hm:          The household-month's sessions.
        aggregation: Unit rule, "day" (default) or "window:<k>".

    Returns:
        FeatureMatrix with rows ordered by unit index.

    Raises:
        ValueError: fewer than 2 usable units ("insufficient observations").
    """
    rows: List[np.ndarray] = []
    units: List[int] = []
    dropped: List[int] = []
    for index, sessions in split_units(hm.sessions, aggregation):
        try:
            rows.append(unit_features(sessions))
            units.append(index)
        except ValueError as e:
            logger.debug(f"{hm.household_id}/{hm.month} unit {index} skipped: {e}")
            dropped.append(index)

    if len(rows) < 2:
        raise ValueError("insufficient observations")

    return FeatureMatrix(
        household_id=hm.household_id,
        month=hm.month,
        units=units,
        values=np.vstack(rows),
        dropped_units=dropped,
    )


def matrices_to_frame(matrices: Iterable[FeatureMatrix]) -> pd.DataFrame:
    """Stack feature matrices into one tidy table (key columns + 17 features)."""
    frames = [m.to_frame() for m in matrices]
    if not frames:
        return pd.DataFrame(columns=[*KEY_COLUMNS, *FEATURE_NAMES])
    return pd.concat(frames, ignore_index=True)


def frame_to_matrices(
    frame: pd.DataFrame,
    columns: Optional[List[str]] = None,
) -> List[FeatureMatrix]:
    """Split a tidy feature (or factor-score) table back into household-months."""
    columns = list(columns or FEATURE_NAMES)
    frame = frame.sort_values(list(KEY_COLUMNS), kind="stable")
    matrices = []
    for (hid, month), group in frame.groupby(["household_id", "month"], sort=True):
        matrices.append(
            FeatureMatrix(
                household_id=str(hid),
                month=str(month),
                units=[int(u) for u in group["unit"]],
                values=group[columns].to_numpy(dtype=float),
            )
        )
    return matrices


# ---------------------------------------------------------------------------
# Scaling
# ---------------------------------------------------------------------------


def standardize(matrix: np.ndarray) -> Tuple[np.ndarray, Scaling]:
    """
    Z-score each column (sd with n-1).

    Constant columns become all zeros and are flagged in Scaling.constant.

    Raises:
        ValueError: fewer than 2 rows.
    """
    x = np.asarray(matrix, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("standardize needs at least 2 rows")

    mean = x.mean(axis=0)
    constant = np.ptp(x, axis=0) == 0
    sd = x.std(axis=0, ddof=1)
    sd[constant] = 0.0

    z = np.zeros_like(x)
    varying = ~constant
    z[:, varying] = (x[:, varying] - mean[varying]) / sd[varying]
    if constant.any():
        logger.debug(f"standardize: {int(constant.sum())} constant column(s) zeroed.")
    return z, Scaling(mean=mean, sd=sd, constant=constant)


def unstandardize(z: np.ndarray, scaling: Scaling) -> np.ndarray:
    """Invert standardize()."""
    return np.asarray(z, dtype=float) * scaling.sd + scaling.mean


def clustering_input(values: np.ndarray, standardize_columns: bool = True) -> np.ndarray:
    """
    Matrix handed to the mixture models.

    Optionally standardizes, then drops columns that are constant within the
    household-month (they carry no clustering information and make every
    covariance singular).
    """
    x = np.asarray(values, dtype=float)
    constant = np.ptp(x, axis=0) == 0
    if standardize_columns:
        x, _ = standardize(x)
    return x[:, ~constant]


def feature_table(row: np.ndarray) -> pd.DataFrame:
    """Long view (data source, feature, value) of one unit's features."""
    row = np.asarray(row, dtype=float)
    if row.shape != (len(FEATURE_NAMES),):
        raise ValueError(f"expected {len(FEATURE_NAMES)} features, got {row.shape}")
    return pd.DataFrame(
        {
            "data_source": [source for _, source, _ in FEATURE_LAYOUT],
            "feature": [label for _, _, label in FEATURE_LAYOUT],
            "value": np.round(row, 2),
        }
    )
