"""
em.py
-----
EM for Gaussian mixtures under the 14 eigen-decomposition covariance
structures.

Flow
----
1. k-means++ seeded partitions (several restarts) give initial responsibilities.
2. M-step: proportions and means in closed form, covariances per structure
   (closed form, or alternating inner updates warm-started from the previous
   parameters so the EM objective never decreases).
3. E-step: log-sum-exp stabilised responsibilities and log-likelihood.
4. Stop on relative log-likelihood change < tol; keep the best restart.

Covariance eigenvalues are floored at ``reg_floor`` times the mean
per-dimension variance of the data. A fit whose final covariances needed the
floor (singular scatter) or that lost a component is marked failed.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from src.gmm.init import kmeans_start
from src.gmm.structures import STRUCTURES, CovStructure, n_params

logger = logging.getLogger(__name__)

DEFAULT_MAX_ITER = 500
DEFAULT_TOL = 1e-8
DEFAULT_N_INIT = 5
DEFAULT_REG_FLOOR = 1e-8
MIN_COMPONENT_MASS = 1e-6
INNER_MAX_ITER = 100
INNER_TOL = 1e-8

_LOG_2PI = math.log(2.0 * math.pi)


class FitFailedError(RuntimeError):
    """A mixture fit degenerated (empty component, singular covariance)."""


@dataclass
class MixtureParams:
    """Mixture parameters with the covariance decomposition kept alongside."""

    weights: np.ndarray        # (G,)
    means: np.ndarray          # (G, d)
    lam: np.ndarray            # (G,) volumes
    shape: np.ndarray          # (G, d) shapes, each with product 1
    orient: np.ndarray         # (G, d, d) orientations (columns = axes)
    covariances: np.ndarray    # (G, d, d)
    regularized: bool = False


@dataclass
class MixtureFit:
    structure: str
    n_components: int
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    responsibilities: np.ndarray
    loglik: float
    n_params: int
    bic: float
    converged: bool
    iterations: int
    seed: int
    regularized: bool = False
    failed: bool = False
    failure: str = ""
    loglik_trace: List[float] = field(default_factory=list)

    @property
    def labels(self) -> np.ndarray:
        return np.argmax(self.responsibilities, axis=1)

    def to_summary(self) -> dict:
        return {
            "structure": self.structure,
            "G": self.n_components,
            "loglik": None if self.failed else self.loglik,
            "n_params": self.n_params,
            "bic": None if self.failed else self.bic,
            "converged": self.converged,
            "seed": self.seed,
            "failure": self.failure,
        }


# ---------------------------------------------------------------------------
# Small linear-algebra helpers
# ---------------------------------------------------------------------------


def _det_root(values: np.ndarray) -> np.ndarray:
    """Geometric mean along the last axis (|diag|^(1/d))."""
    safe = np.maximum(values, np.finfo(float).tiny)
    return np.exp(np.mean(np.log(safe), axis=-1))


def _eig_desc(m: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    values, vectors = np.linalg.eigh(m)
    return values[..., ::-1], vectors[..., ::-1]


def _scatter(x: np.ndarray, resp: np.ndarray, means: np.ndarray) -> np.ndarray:
    diff = x[None, :, :] - means[:, None, :]
    return np.einsum("ng,gni,gnj->gij", resp, diff, diff)


def _objective(w: np.ndarray, nk: np.ndarray, lam: np.ndarray, shape: np.ndarray, orient: np.ndarray) -> float:
    """sum_k n_k log|Sigma_k| + tr(Sigma_k^-1 W_k); the M-step minimises this."""
    d = shape.shape[1]
    proj = np.einsum("gji,gjk,gki->gi", orient, w, orient)
    return float(np.sum(nk * d * np.log(lam)) + np.sum(proj / (lam[:, None] * shape)))


def _shared_orientation_step(w: np.ndarray, orient: np.ndarray, inv_diag: np.ndarray) -> np.ndarray:
    """
    One majorize-minimize update of a shared orientation D for
    min_D sum_k tr(D^T W_k D B_k), B_k = diag(inv_diag[k]).
    """
    d = orient.shape[0]
    top = np.linalg.eigvalsh(w)[:, -1]
    f = np.zeros((d, d))
    for wk, bk, wmax in zip(w, inv_diag, top):
        f += (wk - wmax * np.eye(d)) @ orient * bk[None, :]
    u, _, vt = np.linalg.svd(f)
    return -u @ vt


# ---------------------------------------------------------------------------
# Covariance updates, one per structure
# Each returns (lam (G,), shape (G, d), orient (G, d, d)).
# ---------------------------------------------------------------------------


def _cov_spherical(tag, w, nk, n, d, prev):
    g = w.shape[0]
    traces = np.trace(w, axis1=1, axis2=2)
    if tag == "EII":
        lam = np.full(g, traces.sum() / (n * d))
    else:
        lam = traces / (nk * d)
    return lam, np.ones((g, d)), np.broadcast_to(np.eye(d), (g, d, d)).copy()


def _cov_diagonal(tag, w, nk, n, d, prev):
    g = w.shape[0]
    diags = np.diagonal(w, axis1=1, axis2=2)
    eye = np.broadcast_to(np.eye(d), (g, d, d)).copy()

    if tag == "EEI":
        v = diags.sum(axis=0) / n
        lam0 = _det_root(v)
        return np.full(g, lam0), np.tile(v / lam0, (g, 1)), eye

    if tag == "VVI":
        v = diags / nk[:, None]
        lam = _det_root(v)
        return lam, v / lam[:, None], eye

    if tag == "EVI":
        roots = _det_root(diags)
        lam = np.full(g, roots.sum() / n)
        return lam, diags / roots[:, None], eye

    # VEI: alternate volumes and the shared diagonal shape
    shape = prev.shape[0].copy() if prev is not None else np.ones(d)
    lam = np.ones(g)
    last = np.inf
    for _ in range(INNER_MAX_ITER):
        lam = np.maximum((diags / shape).sum(axis=1) / (d * nk), np.finfo(float).tiny)
        v = (diags / lam[:, None]).sum(axis=0)
        shape = v / _det_root(v)
        value = _objective(w, nk, lam, np.tile(shape, (g, 1)), eye)
        if abs(last - value) <= INNER_TOL * abs(value):
            break
        last = value
    return lam, np.tile(shape, (g, 1)), eye


def _cov_general(tag, w, nk, n, d, prev):
    g = w.shape[0]

    if tag == "EEE":
        values, vectors = _eig_desc(w.sum(axis=0) / n)
        lam0 = _det_root(values)
        return np.full(g, lam0), np.tile(values / lam0, (g, 1)), np.tile(vectors, (g, 1, 1))

    if tag == "VVV":
        values, vectors = _eig_desc(w / nk[:, None, None])
        lam = _det_root(values)
        return lam, values / lam[:, None], vectors

    values, vectors = _eig_desc(w)

    if tag == "EVV":
        roots = _det_root(values)
        lam = np.full(g, roots.sum() / n)
        return lam, values / roots[:, None], vectors

    if tag == "EEV":
        total = values.sum(axis=0)
        root = _det_root(total)
        return np.full(g, root / n), np.tile(total / root, (g, 1)), vectors

    # VEV: alternate volumes and the shared shape; D_k are W_k's eigenvectors
    shape = prev.shape[0].copy() if prev is not None else np.ones(d)
    lam = np.ones(g)
    last = np.inf
    for _ in range(INNER_MAX_ITER):
        lam = np.maximum((values / shape).sum(axis=1) / (d * nk), np.finfo(float).tiny)
        v = (values / lam[:, None]).sum(axis=0)
        shape = v / _det_root(v)
        value = _objective(w, nk, lam, np.tile(shape, (g, 1)), vectors)
        if abs(last - value) <= INNER_TOL * abs(value):
            break
        last = value
    return lam, np.tile(shape, (g, 1)), vectors


def _cov_shared_orientation(tag, w, nk, n, d, prev):
    g = w.shape[0]

    if tag == "VEE":
        if prev is not None:
            c = prev.orient[0] @ np.diag(prev.shape[0]) @ prev.orient[0].T
        else:
            total = w.sum(axis=0)
            c = total / _det_root(np.linalg.eigvalsh(total))
        lam = np.ones(g)
        last = np.inf
        for _ in range(INNER_MAX_ITER):
            c_inv = np.linalg.inv(c)
            lam = np.maximum(
                np.einsum("ij,gji->g", c_inv, w) / (d * nk), np.finfo(float).tiny
            )
            m = (w / lam[:, None, None]).sum(axis=0)
            c = m / _det_root(np.linalg.eigvalsh(m))
            values, vectors = _eig_desc(c)
            value = _objective(w, nk, lam, np.tile(values, (g, 1)), np.tile(vectors, (g, 1, 1)))
            if abs(last - value) <= INNER_TOL * abs(value):
                break
            last = value
        values, vectors = _eig_desc(c)
        shape = values / _det_root(values)
        return lam, np.tile(shape, (g, 1)), np.tile(vectors, (g, 1, 1))

    # EVE / VVE: alternate (volumes, shapes) given D with an MM step on D
    orient = prev.orient[0].copy() if prev is not None else _eig_desc(w.sum(axis=0))[1]
    lam = np.ones(g)
    shape = np.ones((g, d))
    last = np.inf
    for _ in range(INNER_MAX_ITER):
        omega = np.einsum("ji,gjk,ki->gi", orient, w, orient)
        omega = np.maximum(omega, np.finfo(float).tiny)
        roots = _det_root(omega)
        shape = omega / roots[:, None]
        if tag == "EVE":
            lam = np.full(g, roots.sum() / n)
        else:
            lam = roots / nk
        stacked = np.tile(orient, (g, 1, 1))
        value = _objective(w, nk, lam, shape, stacked)
        if abs(last - value) <= INNER_TOL * abs(value):
            break
        last = value
        orient = _shared_orientation_step(w, orient, 1.0 / (lam[:, None] * shape))
    return lam, shape, np.tile(orient, (g, 1, 1))


def _covariance_update(tag, w, nk, n, d, prev):
    structure = CovStructure(tag)
    if structure.shape == "I":
        return _cov_spherical(tag, w, nk, n, d, prev)
    if structure.orientation == "I":
        return _cov_diagonal(tag, w, nk, n, d, prev)
    if tag in ("VEE", "EVE", "VVE"):
        return _cov_shared_orientation(tag, w, nk, n, d, prev)
    return _cov_general(tag, w, nk, n, d, prev)


# ---------------------------------------------------------------------------
# E-step / M-step
# ---------------------------------------------------------------------------


def mstep(
    x: np.ndarray,
    resp: np.ndarray,
    structure: str,
    previous: Optional[MixtureParams] = None,
    floor: float = 0.0,
) -> MixtureParams:
    """
    Maximise the expected complete-data log-likelihood.

    Args:
        x:         (n, d) data.
        resp:      (n, G) responsibilities (rows sum to 1).
        structure: Covariance structure tag.
        previous:  Parameters of the previous iteration; warm start for the
                   structures with inner iterations.
        floor:     Lower bound on covariance eigenvalues.

    Raises:
        FitFailedError: a component's responsibility mass fell below 1e-6.
    """
    x = np.asarray(x, dtype=float)
    n, d = x.shape
    nk = resp.sum(axis=0)
    if np.any(nk < MIN_COMPONENT_MASS):
        raise FitFailedError("empty component")

    weights = nk / n
    means = (resp.T @ x) / nk[:, None]
    w = _scatter(x, resp, means)

    if previous is not None and previous.shape.shape != (resp.shape[1], d):
        previous = None
    lam, shape, orient = _covariance_update(structure, w, nk, n, d, previous)

    eig = lam[:, None] * shape
    regularized = bool(np.any(eig < floor))
    eig = np.maximum(eig, floor)
    covariances = np.einsum("gij,gj,gkj->gik", orient, eig, orient)
    covariances = 0.5 * (covariances + np.transpose(covariances, (0, 2, 1)))

    return MixtureParams(
        weights=weights,
        means=means,
        lam=lam,
        shape=shape,
        orient=orient,
        covariances=covariances,
        regularized=regularized,
    )


def log_component_densities(x: np.ndarray, means: np.ndarray, covariances: np.ndarray) -> np.ndarray:
    """(n, G) matrix of log phi(x_i; mu_k, Sigma_k)."""
    x = np.asarray(x, dtype=float)
    n, d = x.shape
    out = np.empty((n, means.shape[0]))
    for k, (mu, sigma) in enumerate(zip(means, covariances)):
        try:
            chol = linalg.cholesky(sigma, lower=True)
        except linalg.LinAlgError as e:
            raise ValueError("non-PD covariance") from e
        sol = linalg.solve_triangular(chol, (x - mu).T, lower=True)
        logdet = 2.0 * np.sum(np.log(np.diag(chol)))
        out[:, k] = -0.5 * (d * _LOG_2PI + logdet + np.sum(sol ** 2, axis=0))
    return out


def estep(x: np.ndarray, params: MixtureParams) -> Tuple[np.ndarray, float]:
    """
    Responsibilities and log-likelihood at the given parameters.

    Raises:
        ValueError: a covariance is not positive definite.
    """
    weighted = np.log(params.weights)[None, :] + log_component_densities(
        x, params.means, params.covariances
    )
    norm = logsumexp(weighted, axis=1)
    resp = np.exp(weighted - norm[:, None])
    return resp, float(np.sum(norm))


# ---------------------------------------------------------------------------
# EM driver
# ---------------------------------------------------------------------------


def bic(fit, n: int) -> float:
    """Larger-is-better BIC: 2 loglik - n_params ln n."""
    return 2.0 * fit.loglik - fit.n_params * math.log(n)


def _variance_floor(x: np.ndarray, reg_floor: float) -> float:
    per_dim = float(np.mean(np.var(x, axis=0)))
    return reg_floor * (per_dim if per_dim > 0 else 1.0)


def _run_em(x, resp, structure, floor, max_iter, tol):
    params: Optional[MixtureParams] = None
    trace: List[float] = []
    converged = False
    for iteration in range(1, max_iter + 1):
        params = mstep(x, resp, structure, previous=params, floor=floor)
        resp, loglik = estep(x, params)
        if not np.isfinite(loglik):
            raise FitFailedError("non-finite log-likelihood")
        trace.append(loglik)
        if iteration > 1 and abs(trace[-1] - trace[-2]) <= tol * abs(trace[-1]):
            converged = True
            break
    return params, resp, trace, converged


def _failed_fit(structure, g, n, d, seed, reason) -> MixtureFit:
    return MixtureFit(
        structure=structure,
        n_components=g,
        weights=np.full(g, np.nan),
        means=np.full((g, d), np.nan),
        covariances=np.full((g, d, d), np.nan),
        responsibilities=np.full((n, g), np.nan),
        loglik=float("nan"),
        n_params=n_params(structure, g, d),
        bic=float("nan"),
        converged=False,
        iterations=0,
        seed=seed,
        failed=True,
        failure=reason,
    )


def em_fit(
    x: np.ndarray,
    n_components: int,
    structure: str,
    seed: int = 0,
    n_init: int = DEFAULT_N_INIT,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    reg_floor: float = DEFAULT_REG_FLOOR,
) -> MixtureFit:
    """
    Fit a G-component mixture with the given covariance structure.

    Args:
        x:            (n, d) finite data matrix.
        n_components: G >= 1.
        structure:    One of STRUCTURES.
        seed:         Seed for the k-means++ restarts.
        n_init:       Number of restarts (1 when G = 1).
        max_iter:     EM iteration budget.
        tol:          Relative log-likelihood change for convergence.
        reg_floor:    Eigenvalue floor relative to the mean variance.

    Returns:
        MixtureFit; ``failed`` is set (and never raised) for degenerate fits.

    Raises:
        ValueError: n < G, d < 1, non-finite data or unknown structure.
    """
    CovStructure(structure)
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] < 1:
        raise ValueError("x must be a 2-D array with at least one column")
    if not np.all(np.isfinite(x)):
        raise ValueError("x contains non-finite values")
    n, d = x.shape
    if n < n_components:
        raise ValueError("n < G")
    if n_components < 1:
        raise ValueError("G must be at least 1")

    floor = _variance_floor(x, reg_floor)
    rng = np.random.default_rng(seed)
    restarts = 1 if n_components == 1 else n_init

    best = None
    reasons: List[str] = []
    for _ in range(restarts):
        start = kmeans_start(x, n_components, int(rng.integers(2**31 - 1)))
        try:
            params, resp, trace, converged = _run_em(x, start, structure, floor, max_iter, tol)
        except (FitFailedError, ValueError) as e:
            reasons.append(str(e))
            continue
        if params.regularized:
            reasons.append("singular covariance")
            continue
        if best is None or trace[-1] > best[2][-1]:
            best = (params, resp, trace, converged)

    if best is None:
        reason = reasons[0] if reasons else "no successful restart"
        logger.debug(f"{structure} G={n_components} failed: {reason}")
        return _failed_fit(structure, n_components, n, d, seed, reason)

    params, resp, trace, converged = best
    k = n_params(structure, n_components, d)
    loglik = trace[-1]
    return MixtureFit(
        structure=structure,
        n_components=n_components,
        weights=params.weights,
        means=params.means,
        covariances=params.covariances,
        responsibilities=resp,
        loglik=loglik,
        n_params=k,
        bic=2.0 * loglik - k * math.log(n),
        converged=converged,
        iterations=len(trace),
        seed=seed,
        regularized=params.regularized,
        loglik_trace=trace,
    )


# ---------------------------------------------------------------------------
# Grid evaluation
# ---------------------------------------------------------------------------


def _fit_cell(args) -> MixtureFit:
    x, g, structure, seed, n_init, max_iter, tol = args
    return em_fit(x, g, structure, seed=seed, n_init=n_init, max_iter=max_iter, tol=tol)


def cell_seeds(seed: int, count: int) -> List[int]:
    """Independent per-cell seeds derived from a master seed."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


def fit_grid(
    x: np.ndarray,
    structures: Sequence[str] = STRUCTURES,
    g_values: Iterable[int] = range(1, 16),
    seed: int = 0,
    n_init: int = DEFAULT_N_INIT,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    n_jobs: int = 1,
) -> List[MixtureFit]:
    """
    Fit every (structure, G) cell.

    Seeds are derived per cell from ``seed`` so the result, ordered by
    (structure index, G), does not depend on ``n_jobs``.
    """
    g_values = list(g_values)
    cells = [(s, g) for s in structures for g in g_values]
    seeds = cell_seeds(seed, len(cells))
    jobs = [(x, g, s, cs, n_init, max_iter, tol) for (s, g), cs in zip(cells, seeds)]

    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(_fit_cell, jobs))
    return [_fit_cell(job) for job in jobs]
