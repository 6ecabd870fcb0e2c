"""
init.py
-------
Seeded k-means++ starting partitions for EM.

The hard k-means assignment is smoothed into responsibilities: 0.9 on the
assigned component, 0.1 / (G - 1) spread over the others.
"""

import logging
import warnings

import numpy as np
from sklearn.cluster import KMeans
from sklearn.exceptions import ConvergenceWarning

logger = logging.getLogger(__name__)

OWN_MASS = 0.9


def smooth_labels(labels: np.ndarray, n_components: int) -> np.ndarray:
    """Turn hard labels into smoothed responsibilities."""
    n = labels.shape[0]
    if n_components == 1:
        return np.ones((n, 1))
    resp = np.full((n, n_components), (1.0 - OWN_MASS) / (n_components - 1))
    resp[np.arange(n), labels] = OWN_MASS
    return resp


def kmeans_start(x: np.ndarray, n_components: int, random_state: int) -> np.ndarray:
    """
    k-means++ seeded k-means partition, returned as smoothed responsibilities.

    Args:
        x:            (n, d) data.
        n_components: Number of mixture components G.
        random_state: Seed for the k-means++ draw.
    """
    if n_components == 1:
        return np.ones((x.shape[0], 1))
    with warnings.catch_warnings():
        # duplicate points can leave fewer distinct clusters than requested
        warnings.simplefilter("ignore", ConvergenceWarning)
        labels = KMeans(
            n_clusters=n_components,
            init="k-means++",
            n_init=1,
            random_state=random_state,
        ).fit_predict(x)
    return smooth_labels(labels, n_components)
