"""
truncgamma.py
-------------
Gamma distribution with shape tau and rate tau / mu (untruncated mean mu),
restricted to [1, inf) and renormalized by its upper tail at 1.
"""

from typing import Optional, Union

import numpy as np
from scipy.special import gammaincc, gammainccinv, gammaln

ArrayLike = Union[float, np.ndarray]

# Below this tail mass at 1 the inverse CDF loses precision; sample by rejection
TAIL_SWITCH = 1e-12


def _check(mu: ArrayLike, tau: ArrayLike):
    mu = np.asarray(mu, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if np.any(~(mu > 0)) or np.any(~(tau > 0)):
        raise ValueError("mu and tau must be positive")
    return mu, tau


def log_upper_tail(shape: ArrayLike, x: ArrayLike) -> np.ndarray:
    """
    log Q(shape, x), the regularized upper incomplete gamma function.

    Falls back to the asymptotic expansion
    Q ~ x^(a-1) e^(-x) / Gamma(a) * (1 + (a-1)/x + (a-1)(a-2)/x^2 + ...)
    where Q underflows.
    """
    a, x = np.broadcast_arrays(np.asarray(shape, dtype=float), np.asarray(x, dtype=float))
    q = gammaincc(a, x)
    out = np.empty(a.shape, dtype=float)
    ok = q > np.finfo(float).tiny
    out[ok] = np.log(q[ok])
    if not np.all(ok):
        aa, xx = a[~ok], x[~ok]
        series = np.ones_like(xx)
        term = np.ones_like(xx)
        for k in range(1, 6):
            term = term * (aa - k) / xx
            series = series + term
        out[~ok] = (aa - 1.0) * np.log(xx) - xx - gammaln(aa) + np.log(np.abs(series))
    return out


def trunc_gamma_logpdf(y: ArrayLike, mu: ArrayLike, tau: ArrayLike) -> Union[float, np.ndarray]:
    """
    Log density on [1, inf); -inf below 1.

    Raises:
        ValueError: mu or tau not positive.
    """
    mu, tau = _check(mu, tau)
    y = np.asarray(y, dtype=float)
    rate = tau / mu
    y_safe = np.maximum(y, 1.0)
    logpdf = (
        tau * np.log(rate)
        + (tau - 1.0) * np.log(y_safe)
        - rate * y_safe
        - gammaln(tau)
        - log_upper_tail(tau, rate)
    )
    logpdf = np.where(y >= 1.0, logpdf, -np.inf)
    return float(logpdf) if np.ndim(logpdf) == 0 else logpdf


def trunc_gamma_mean(mu: ArrayLike, tau: ArrayLike) -> Union[float, np.ndarray]:
    """E[Y | Y >= 1] = (tau / rate) * Q(tau + 1, rate) / Q(tau, rate)."""
    mu, tau = _check(mu, tau)
    rate = tau / mu
    mean = mu * np.exp(log_upper_tail(tau + 1.0, rate) - log_upper_tail(tau, rate))
    return float(mean) if np.ndim(mean) == 0 else mean


def trunc_gamma_sample(
    mu: ArrayLike,
    tau: ArrayLike,
    rng: np.random.Generator,
    size: Optional[Union[int, tuple]] = None,
) -> Union[float, np.ndarray]:
    """
    Draw from the truncated Gamma.

    Inverse CDF on the conditional tail, y = Q^-1(U * Q(tau, rate)) / rate.
    When the tail mass at 1 is below 1e-12 a shifted exponential proposal
    1 + Exp(rate - max(tau - 1, 0)) is accepted with probability
    exp((tau - 1) log y - max(tau - 1, 0) (y - 1)).
    """
    mu, tau = _check(mu, tau)
    shape = np.broadcast_shapes(mu.shape, tau.shape) if size is None else size
    if isinstance(shape, int):
        shape = (shape,)
    count = int(np.prod(shape))
    mu = np.broadcast_to(mu, shape).ravel()
    tau = np.broadcast_to(tau, shape).ravel()
    rate = tau / mu

    tail = gammaincc(tau, rate)
    u = rng.random(count)
    with np.errstate(invalid="ignore", over="ignore"):
        y = gammainccinv(tau, u * tail) / rate
    y = np.maximum(np.where(np.isfinite(y), y, 1.0), 1.0)

    excess = np.maximum(tau - 1.0, 0.0)
    slope = rate - excess
    pending = np.nonzero((tail < TAIL_SWITCH) & (slope > 0))[0]
    while pending.size:
        proposal = 1.0 + rng.exponential(1.0 / slope[pending])
        log_accept = (tau[pending] - 1.0) * np.log(proposal) - excess[pending] * (proposal - 1.0)
        accepted = np.log(rng.random(pending.size)) < log_accept
        y[pending[accepted]] = proposal[accepted]
        pending = pending[~accepted]

    y = y.reshape(shape)
    return float(y) if y.ndim == 0 else y
