"""
weights.py
----------
The structure x components BIC matrix, its exponential weight transform and
the model-averaged number of profiles

    G_hat = sum_p sum_g w_pg * C_g,   w_pg ∝ exp((bic_pg - max bic) / 2).

Failed or unfitted cells are masked: they get weight exactly 0 and take no
part in the normalization.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

import numpy as np
import pandas as pd

from src.gmm.em import MixtureFit
from src.gmm.structures import STRUCTURES

logger = logging.getLogger(__name__)

COMPONENT_GRID: Tuple[int, ...] = tuple(range(1, 16))


@dataclass
class BicMatrix:
    """BIC values (rows = structures, columns = component counts) with a validity mask."""

    values: np.ndarray
    mask: np.ndarray
    structures: Tuple[str, ...] = STRUCTURES
    components: Tuple[int, ...] = COMPONENT_GRID

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        expected = (len(self.structures), len(self.components))
        if self.values.shape != expected or self.mask.shape != expected:
            raise ValueError(f"BIC matrix must have shape {expected}")
        self.mask &= np.isfinite(self.values)

    @property
    def n_valid(self) -> int:
        return int(self.mask.sum())

    def best(self) -> Tuple[str, int]:
        """(structure, G) of the largest valid BIC; ties go to the first cell in grid order."""
        if self.n_valid == 0:
            raise ValueError("no valid fits")
        masked = np.where(self.mask, self.values, -np.inf)
        p, g = np.unravel_index(int(np.argmax(masked)), masked.shape)
        return self.structures[p], self.components[g]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(
            np.where(self.mask, self.values, np.nan),
            index=list(self.structures),
            columns=list(self.components),
        )
        frame.index.name = "structure"
        return frame

    @classmethod
    def from_fits(
        cls,
        fits: Iterable[MixtureFit],
        structures: Sequence[str] = STRUCTURES,
        components: Sequence[int] = COMPONENT_GRID,
    ) -> "BicMatrix":
        structures = tuple(structures)
        components = tuple(components)
        values = np.full((len(structures), len(components)), np.nan)
        mask = np.zeros_like(values, dtype=bool)
        for fit in fits:
            if fit.structure not in structures or fit.n_components not in components:
                continue
            p = structures.index(fit.structure)
            g = components.index(fit.n_components)
            if not fit.failed:
                values[p, g] = fit.bic
                mask[p, g] = True
        return cls(values=values, mask=mask, structures=structures, components=components)


@dataclass
class WeightMatrix:
    """Normalized model weights; ``relative`` holds the unnormalized exp terms."""

    weights: np.ndarray
    relative: np.ndarray
    mask: np.ndarray
    components: Tuple[int, ...] = COMPONENT_GRID
    structures: Tuple[str, ...] = STRUCTURES


def weight_transform(bic: BicMatrix) -> WeightMatrix:
    """
    Exponential BIC weights over the valid cells.

    Computed as exp((w - max) / 2).

    Raises:
        ValueError: every cell is masked ("no valid fits").
    """
    if bic.n_valid == 0:
        logger.error("All BIC cells are masked.")
        raise ValueError("no valid fits")

    top = np.max(bic.values[bic.mask])
    relative = np.zeros_like(bic.values)
    relative[bic.mask] = np.exp((bic.values[bic.mask] - top) / 2.0)
    weights = relative / relative.sum()
    return WeightMatrix(
        weights=weights,
        relative=relative,
        mask=bic.mask.copy(),
        components=bic.components,
        structures=bic.structures,
    )


def estimate_g(weights: WeightMatrix) -> float:
    """
    Model-averaged component count, clipped to the range of unmasked counts.

    A uniform grid over 1..15 gives exactly 8.0; a single valid column gives its G.
    """
    c = np.asarray(weights.components, dtype=float)
    total = float(weights.relative.sum())
    if total <= 0:
        raise ValueError("no valid fits")
    g_hat = float((weights.relative * c[None, :]).sum() / total)

    valid_c = c[weights.mask.any(axis=0)]
    return float(np.clip(g_hat, valid_c.min(), valid_c.max()))
