"""
stats.py
--------
The seven summary statistics reported for program ratios and session
durations: mean, median, sd, skewness, kurtosis, 2.5% and 97.5% quantiles.

Conventions: sd uses n-1; skewness is m3 / m2^1.5 and kurtosis m4 / m2^2
(non-excess) with 1/n central moments; quantiles interpolate linearly between
order statistics (h = (n-1)p + 1). When all values coincide (including n = 1)
sd, skewness and kurtosis are 0 and the result is flagged degenerate.
"""

from dataclasses import astuple, dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy import stats

QUANTILES = (0.025, 0.975)


@dataclass(frozen=True)
class StatSeven:
    mean: float
    median: float
    sd: float
    skewness: float
    kurtosis: float
    q025: float
    q975: float
    degenerate: bool = False

    def as_tuple(self) -> Tuple[float, ...]:
        return astuple(self)[:7]


def stat_seven(values: Sequence[float]) -> StatSeven:
    """
    Summarise a sample with the seven profile statistics.

    Raises:
        ValueError: values is empty or contains non-finite entries.
    """
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("stat_seven needs at least one value")
    if not np.all(np.isfinite(x)):
        raise ValueError("stat_seven got non-finite values")

    mean = float(np.mean(x))
    median = float(np.median(x))
    q025, q975 = (float(q) for q in np.quantile(x, QUANTILES, method="linear"))

    if np.ptp(x) == 0:
        c = float(x[0])
        return StatSeven(c, c, 0.0, 0.0, 0.0, c, c, degenerate=True)

    return StatSeven(
        mean=mean,
        median=median,
        sd=float(np.std(x, ddof=1)),
        skewness=float(stats.skew(x, bias=True)),
        kurtosis=float(stats.kurtosis(x, fisher=False, bias=True)),
        q025=q025,
        q975=q975,
    )
