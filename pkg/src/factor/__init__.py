from .efa import (
    EfaModel,
    KaiserResult,
    NonConvergenceError,
    choose_n_factors,
    factor_scores,
    fit_efa,
    load_efa,
    loadings_table,
    save_efa,
)

__all__ = [
    "EfaModel",
    "KaiserResult",
    "NonConvergenceError",
    "choose_n_factors",
    "factor_scores",
    "fit_efa",
    "load_efa",
    "loadings_table",
    "save_efa",
]
