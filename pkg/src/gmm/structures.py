"""
structures.py
-------------
The 14 eigen-decomposition covariance structures

    Sigma_k = lambda_k * D_k * A_k * D_k^T

coded by three letters for volume (lambda), shape (A) and orientation (D):
E = equal across components, V = variable, I = identity.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

STRUCTURES: Tuple[str, ...] = (
    "EII", "VII", "EEI", "VEI", "EVI", "VVI", "EEE",
    "EVE", "VEE", "VVE", "EEV", "VEV", "EVV", "VVV",
)


@dataclass(frozen=True)
class CovStructure:
    tag: str

    def __post_init__(self) -> None:
        if self.tag not in STRUCTURES:
            raise ValueError(f"unknown covariance structure '{self.tag}'")

    @property
    def volume(self) -> str:
        return self.tag[0]

    @property
    def shape(self) -> str:
        return self.tag[1]

    @property
    def orientation(self) -> str:
        return self.tag[2]

    @property
    def index(self) -> int:
        return STRUCTURES.index(self.tag)


def n_cov_params(tag: str, g: int, d: int) -> int:
    """Free covariance parameters of a structure with g components in d dimensions."""
    CovStructure(tag)
    rot = d * (d - 1) // 2
    counts = {
        "EII": 1,
        "VII": g,
        "EEI": d,
        "VEI": g + (d - 1),
        "EVI": 1 + g * (d - 1),
        "VVI": g * d,
        "EEE": d * (d + 1) // 2,
        "EVE": 1 + g * (d - 1) + rot,
        "VEE": g + (d - 1) + rot,
        "VVE": g + g * (d - 1) + rot,
        "EEV": 1 + (d - 1) + g * rot,
        "VEV": g + (d - 1) + g * rot,
        "EVV": 1 + g * (d - 1) + g * rot,
        "VVV": g * d * (d + 1) // 2,
    }
    return counts[tag]


def n_params(tag: str, g: int, d: int) -> int:
    """Total free parameters: covariances + g*d means + (g-1) proportions."""
    return n_cov_params(tag, g, d) + g * d + (g - 1)


# ---------------------------------------------------------------------------
# Constraint checks
# ---------------------------------------------------------------------------


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(b))), np.finfo(float).tiny)
    return float(np.max(np.abs(a - b)) / scale)


def check_structure(covariances: np.ndarray, tag: str) -> float:
    """
    Largest relative violation of the constraints encoded by ``tag``.

    Checks volume equality, shape equality / sphericity, diagonal orientation
    and shared orientation (pairwise commuting covariances).
    """
    structure = CovStructure(tag)
    sigmas = np.asarray(covariances, dtype=float)
    g, d, _ = sigmas.shape

    _, logdets = np.linalg.slogdet(sigmas)
    volumes = np.exp(logdets / d)
    normalized = sigmas / volumes[:, None, None]
    worst = max(_rel(s, s.T) for s in sigmas)

    if structure.volume == "E":
        worst = max(worst, _rel(volumes, np.full(g, volumes[0])))

    if structure.shape == "I":
        eye = np.eye(d)
        worst = max(worst, max(_rel(s, eye) for s in normalized))
        return worst

    if structure.orientation == "I":
        for s in sigmas:
            off = s - np.diag(np.diag(s))
            scale = max(float(np.max(np.abs(np.diag(s)))), np.finfo(float).tiny)
            worst = max(worst, float(np.max(np.abs(off))) / scale)
        if structure.shape == "E":
            diag0 = np.diag(normalized[0])
            worst = max(worst, max(_rel(np.diag(s), diag0) for s in normalized))
        return worst

    if structure.shape == "E" and structure.orientation == "E":
        worst = max(worst, max(_rel(s, normalized[0]) for s in normalized))
        return worst

    if structure.shape == "E":
        spectra = np.sort(np.linalg.eigvalsh(normalized), axis=1)
        worst = max(worst, max(_rel(s, spectra[0]) for s in spectra))

    if structure.orientation == "E":
        for j in range(g):
            for k in range(j + 1, g):
                a, b = sigmas[j], sigmas[k]
                commutator = a @ b - b @ a
                scale = np.linalg.norm(a) * np.linalg.norm(b)
                worst = max(worst, float(np.linalg.norm(commutator) / scale))

    return worst
