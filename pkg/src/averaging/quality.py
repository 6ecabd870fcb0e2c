"""
quality.py
----------
Ratio of the average within-cluster to the average between-cluster distance.
"""

import numpy as np
from scipy.spatial.distance import pdist


def wb_ratio(x: np.ndarray, labels: np.ndarray) -> float:
    """
    Mean pairwise Euclidean distance over same-cluster pairs divided by the
    mean over different-cluster pairs.

    Raises:
        ValueError: fewer than two clusters, no same-cluster pair, or a zero
                    between-cluster mean ("ratio undefined").
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    labels = np.asarray(labels)
    if labels.shape[0] != x.shape[0]:
        raise ValueError("labels and rows differ in length")
    if x.shape[0] < 2 or np.unique(labels).size < 2:
        raise ValueError("ratio undefined")

    distances = pdist(x)
    i, j = np.triu_indices(x.shape[0], k=1)
    same = labels[i] == labels[j]
    if not same.any():
        raise ValueError("ratio undefined")

    between = float(distances[~same].mean())
    if between == 0.0:
        raise ValueError("ratio undefined")
    return float(distances[same].mean()) / between
