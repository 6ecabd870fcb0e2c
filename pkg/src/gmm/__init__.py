from .em import (
    FitFailedError,
    MixtureFit,
    MixtureParams,
    bic,
    cell_seeds,
    em_fit,
    estep,
    fit_grid,
    mstep,
)
from .init import kmeans_start, smooth_labels
from .structures import STRUCTURES, CovStructure, check_structure, n_cov_params, n_params

__all__ = [
    "STRUCTURES",
    "CovStructure",
    "FitFailedError",
    "MixtureFit",
    "MixtureParams",
    "bic",
    "cell_seeds",
    "check_structure",
    "em_fit",
    "estep",
    "fit_grid",
    "kmeans_start",
    "mstep",
    "n_cov_params",
    "n_params",
    "smooth_labels",
]
