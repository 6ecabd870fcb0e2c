"""
planted.py
----------
Data with known structure: spherical Gaussian clusters and orthogonal
factor models.
"""

from typing import Tuple

import numpy as np


def planted_clusters(
    n: int,
    k: int,
    d: int,
    separation: float = 10.0,
    seed: int = 0,
    sigma: float = 1.0,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    k spherical N(c_j, sigma^2 I) clusters whose centres are pairwise
    ``separation * sigma`` apart when k <= d (scaled unit vectors); for
    k > d the centres lie in random directions at radius separation * sigma * k.

    Returns:
        (X (n, d), labels (n,)) with balanced cluster sizes.
    """
    if k < 1 or d < 1 or n < k:
        raise ValueError("need n >= k >= 1 and d >= 1")
    rng = np.random.default_rng(seed)
    if k <= d:
        centres = np.zeros((k, d))
        centres[np.arange(k), np.arange(k)] = separation * sigma / np.sqrt(2.0)
    else:
        directions = rng.standard_normal((k, d))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        centres = directions * separation * sigma * k
    labels = rng.permutation(np.arange(n) % k)
    x = centres[labels] + sigma * rng.standard_normal((n, d))
    return x, labels


def block_loadings(p: int = 17, k: int = 4, strength: float = 0.8) -> np.ndarray:
    """Simple-structure loadings: feature j loads ``strength`` on factor j mod k."""
    loadings = np.zeros((p, k))
    loadings[np.arange(p), np.arange(p) % k] = strength
    return loadings


def _orthonormal_scores(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """n x m columns with mean exactly 0, sample sd 1 and zero sample correlations."""
    z = rng.standard_normal((n, m))
    z -= z.mean(axis=0)
    q, _ = np.linalg.qr(z)
    return q * np.sqrt(n - 1)


def planted_factors(
    n: int,
    loadings: np.ndarray,
    seed: int = 0,
    exact: bool = False,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    X = F L^T + E sqrt(1 - h^2) for standard factors F and unique noise E.

    Args:
        n:        Rows.
        loadings: (p, k) loadings with row communalities h^2 <= 1.
        seed:     RNG seed.
        exact:    Make F and E exactly uncorrelated in-sample, so the sample
                  correlation matrix equals L L^T + diag(1 - h^2).

    Returns:
        (X (n, p), F (n, k))
    """
    loadings = np.asarray(loadings, dtype=float)
    p, k = loadings.shape
    communality = np.sum(loadings ** 2, axis=1)
    if np.any(communality > 1.0 + 1e-12):
        raise ValueError("row communalities must not exceed 1")
    if exact and n <= p + k:
        raise ValueError("exact construction needs n > p + k")

    rng = np.random.default_rng(seed)
    if exact:
        scores = _orthonormal_scores(n, k + p, rng)
        factors, noise = scores[:, :k], scores[:, k:]
    else:
        factors = rng.standard_normal((n, k))
        noise = rng.standard_normal((n, p))
    unique_sd = np.sqrt(np.clip(1.0 - communality, 0.0, None))
    return factors @ loadings.T + noise * unique_sd, factors
