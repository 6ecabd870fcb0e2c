"""
efa.py
------
Exploratory factor analysis of the 17 behavioural features.

Extraction is iterated principal axis on the correlation matrix (initial
communalities = squared multiple correlations), followed by a varimax
rotation. Scores use the regression (Thomson) method.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from factor_analyzer.rotator import Rotator
from factor_analyzer.utils import smc

logger = logging.getLogger(__name__)

HEYWOOD_CLAMP = 0.995
DEFAULT_MAX_ITER = 200
DEFAULT_TOL = 1e-6


class NonConvergenceError(RuntimeError):
    """Principal-axis iterations did not settle; carries the last iterate."""

    def __init__(self, message: str, loadings: np.ndarray, communalities: np.ndarray) -> None:
        super().__init__(message)
        self.loadings = loadings
        self.communalities = communalities


@dataclass(frozen=True)
class KaiserResult:
    n_factors: int
    eigenvalues: np.ndarray
    cumulative_fraction: np.ndarray
    fallback: bool = False


@dataclass
class EfaModel:
    """Fitted factor model on the correlation scale."""

    loadings: np.ndarray
    uniquenesses: np.ndarray
    n_factors: int
    explained_variance_fraction: float
    rotation: str
    mean: np.ndarray
    sd: np.ndarray
    correlation: np.ndarray
    feature_names: List[str] = field(default_factory=list)
    heywood: bool = False
    iterations: int = 0
    residual_trace: List[float] = field(default_factory=list)

    @property
    def communalities(self) -> np.ndarray:
        return np.sum(self.loadings ** 2, axis=1)

    def to_dict(self) -> dict:
        return {
            "loadings": self.loadings.tolist(),
            "uniquenesses": self.uniquenesses.tolist(),
            "n_factors": self.n_factors,
            "explained_variance_fraction": self.explained_variance_fraction,
            "rotation": self.rotation,
            "mean": self.mean.tolist(),
            "sd": self.sd.tolist(),
            "correlation": self.correlation.tolist(),
            "feature_names": list(self.feature_names),
            "heywood": self.heywood,
            "iterations": self.iterations,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "EfaModel":
        return cls(
            loadings=np.asarray(payload["loadings"], dtype=float),
            uniquenesses=np.asarray(payload["uniquenesses"], dtype=float),
            n_factors=int(payload["n_factors"]),
            explained_variance_fraction=float(payload["explained_variance_fraction"]),
            rotation=payload["rotation"],
            mean=np.asarray(payload["mean"], dtype=float),
            sd=np.asarray(payload["sd"], dtype=float),
            correlation=np.asarray(payload["correlation"], dtype=float),
            feature_names=list(payload.get("feature_names", [])),
            heywood=bool(payload.get("heywood", False)),
            iterations=int(payload.get("iterations", 0)),
        )


# ---------------------------------------------------------------------------
# Number of factors
# ---------------------------------------------------------------------------


def choose_n_factors(correlation: np.ndarray) -> KaiserResult:
    """
    Kaiser rule: retain factors whose eigenvalue exceeds 1.

    When no eigenvalue exceeds 1 a warning is logged and one factor is kept.

    Raises:
        ValueError: non-finite or non-square matrix.
    """
    r = np.asarray(correlation, dtype=float)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValueError("correlation matrix must be square")
    if not np.all(np.isfinite(r)):
        raise ValueError("correlation matrix has non-finite entries")

    eigenvalues = np.sort(np.linalg.eigvalsh(r))[::-1]
    cumulative = np.cumsum(eigenvalues) / np.sum(eigenvalues)
    k = int(np.sum(eigenvalues > 1.0))
    if k == 0:
        logger.warning("No eigenvalue exceeds 1; falling back to a single factor.")
        return KaiserResult(1, eigenvalues, cumulative, fallback=True)
    logger.info(f"Kaiser rule retains {k} factor(s) ({cumulative[k - 1]:.1%} of variance).")
    return KaiserResult(k, eigenvalues, cumulative)


# ---------------------------------------------------------------------------
# Extraction + rotation
# ---------------------------------------------------------------------------


def _offdiag_residual(r: np.ndarray, loadings: np.ndarray) -> float:
    resid = r - loadings @ loadings.T
    np.fill_diagonal(resid, 0.0)
    return float(np.sqrt(np.sum(resid ** 2)))


def _principal_axis(
    r: np.ndarray,
    k: int,
    max_iter: int,
    tol: float,
):
    communalities = np.clip(smc(r), 1e-3, 1.0)
    trace: List[float] = []
    heywood = False
    loadings = np.zeros((r.shape[0], k))

    for iteration in range(1, max_iter + 1):
        reduced = r.copy()
        np.fill_diagonal(reduced, communalities)
        values, vectors = np.linalg.eigh(reduced)
        order = np.argsort(values)[::-1][:k]
        loadings = vectors[:, order] * np.sqrt(np.clip(values[order], 0.0, None))

        updated = np.sum(loadings ** 2, axis=1)
        trace.append(_offdiag_residual(r, loadings))
        over = updated > 1.0
        if np.any(over):
            heywood = True
            # shrink offending rows so loadings agree with the clamped communalities
            loadings[over] *= np.sqrt(HEYWOOD_CLAMP / updated[over])[:, None]
            updated = np.sum(loadings ** 2, axis=1)

        if np.max(np.abs(updated - communalities)) < tol:
            return loadings, updated, iteration, heywood, trace
        communalities = updated

    raise NonConvergenceError(
        f"principal axis extraction did not converge in {max_iter} iterations",
        loadings=loadings,
        communalities=communalities,
    )


def _orient(loadings: np.ndarray) -> np.ndarray:
    """Order factors by explained variance; make each factor's largest loading positive."""
    order = np.argsort(-np.sum(loadings ** 2, axis=0), kind="stable")
    loadings = loadings[:, order]
    peaks = loadings[np.argmax(np.abs(loadings), axis=0), np.arange(loadings.shape[1])]
    return loadings * np.where(peaks < 0, -1.0, 1.0)


def fit_efa(
    x: np.ndarray,
    n_factors: int,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    feature_names: Optional[Sequence[str]] = None,
) -> EfaModel:
    """
    Fit an orthogonal factor model to a (standardized) feature matrix.

    Args:
        x:             (n, p) data matrix.
        n_factors:     Number of factors k >= 1.
        max_iter:      Principal-axis iteration budget.
        tol:           Max absolute communality change for convergence.
        feature_names: Optional column labels stored on the model.

    Returns:
        EfaModel with varimax-rotated loadings (rotation "none" when k = 1).

    Raises:
        ValueError:          k < 1, fewer than 3k rows, or constant columns.
        NonConvergenceError: extraction did not converge.
    """
    x = np.asarray(x, dtype=float)
    if n_factors < 1:
        raise ValueError("n_factors must be at least 1.")
    if x.ndim != 2 or x.shape[0] < 3 * n_factors:
        raise ValueError(f"fit_efa needs at least {3 * n_factors} rows for {n_factors} factor(s).")
    if n_factors > x.shape[1]:
        raise ValueError("n_factors cannot exceed the number of columns.")

    mean = x.mean(axis=0)
    sd = x.std(axis=0, ddof=1)
    if np.any(sd == 0):
        raise ValueError("fit_efa got constant column(s); drop them first.")

    r = np.corrcoef(x, rowvar=False)
    loadings, communalities, iterations, heywood, trace = _principal_axis(r, n_factors, max_iter, tol)
    if heywood:
        logger.warning(f"Heywood case: communalities clamped to {HEYWOOD_CLAMP}.")

    rotation = "none"
    if n_factors > 1:
        loadings = Rotator(method="varimax").fit_transform(loadings)
        rotation = "varimax"
    loadings = _orient(loadings)

    explained = float(np.sum(communalities) / x.shape[1])
    logger.info(
        f"EFA: {n_factors} factor(s), {iterations} iteration(s), "
        f"{explained:.1%} common variance."
    )
    return EfaModel(
        loadings=loadings,
        uniquenesses=np.clip(1.0 - communalities, 1.0 - HEYWOOD_CLAMP, 1.0),
        n_factors=n_factors,
        explained_variance_fraction=explained,
        rotation=rotation,
        mean=mean,
        sd=sd,
        correlation=r,
        feature_names=list(feature_names or []),
        heywood=heywood,
        iterations=iterations,
        residual_trace=trace,
    )


def factor_scores(model: EfaModel, x: np.ndarray) -> np.ndarray:
    """
    Regression (Thomson) factor scores, scaled with the model's stored moments.

    Raises:
        ValueError: column count does not match the fitted model.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    p = model.loadings.shape[0]
    if x.shape[1] != p or model.mean.shape != (p,) or model.sd.shape != (p,):
        raise ValueError(f"expected {p} columns matching the model's scaling, got {x.shape[1]}")
    z = (x - model.mean) / model.sd
    weights = np.linalg.solve(model.correlation, model.loadings)
    return z @ weights


# ---------------------------------------------------------------------------
# Reporting / persistence
# ---------------------------------------------------------------------------


def loadings_table(
    model: EfaModel,
    sources: Optional[Sequence[str]] = None,
    blank_below: float = 0.10,
    bold_above: float = 0.6,
) -> pd.DataFrame:
    """
    Loadings in report form: data source, feature, one
    column per factor. Loadings with |l| < blank_below are shown as "-",
    those with |l| > bold_above carry a trailing "*".
    """
    names = model.feature_names or [f"x{j + 1}" for j in range(model.loadings.shape[0])]
    table = pd.DataFrame({"data_source": list(sources or [""] * len(names)), "feature": names})
    for f in range(model.n_factors):
        cells = []
        for value in model.loadings[:, f]:
            if abs(value) < blank_below:
                cells.append("-")
            else:
                cells.append(f"{value:.2f}{'*' if abs(value) > bold_above else ''}")
        table[f"factor_{f + 1}"] = cells
    return table


def save_efa(model: EfaModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(model.to_dict(), indent=2), encoding="utf-8")
    return path


def load_efa(path: Union[str, Path]) -> EfaModel:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"EFA model not found: {path}")
    return EfaModel.from_dict(json.loads(path.read_text(encoding="utf-8")))
