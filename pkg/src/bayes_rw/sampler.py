"""
sampler.py
----------
Adaptive Metropolis-within-Gibbs for the random-walk model.

One sweep updates, in order:
  1. beta_0                    scalar Gaussian random walk
  2. log sigma2_beta           random walk on the log scale (Jacobian included)
  3. log sigma2_xi             idem
  4. log tau                   idem
  5. beta_i                    all households at once, independent accepts
  6. w_it                      odd months then even months, independent accepts

Each coordinate has its own proposal scale. During burn-in the log-scale is
nudged every ``adapt_batch`` iterations by +/- min(0.01, 1/sqrt(batch))
toward the target acceptance rate; afterwards it is frozen.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from src.bayes_rw.model import (
    BETA0_PRIOR_VAR,
    SIGMA2_UPPER,
    TAU_UPPER,
    ModelState,
    PanelData,
    log_posterior,
    loglik_cells,
    normal_logpdf,
    walk_increments,
)
from src.config import McmcSchedule

logger = logging.getLogger(__name__)

HYPERPARAMETERS = ("beta0", "sigma2_beta", "sigma2_xi", "tau")


class InitializationError(RuntimeError):
    """The starting state has a non-finite log posterior."""

    def __init__(self, message: str, diagnostic: Dict[str, float]) -> None:
        super().__init__(message)
        self.diagnostic = diagnostic


@dataclass
class PosteriorDraws:
    """Thinned post-burn-in draws, leading axes (chain, draw)."""

    beta0: np.ndarray
    sigma2_beta: np.ndarray
    sigma2_xi: np.ndarray
    tau: np.ndarray
    beta: np.ndarray          # (chain, draw, N)
    w: np.ndarray             # (chain, draw, N, T)
    seeds: List[int]
    schedule: McmcSchedule
    household_ids: List[str] = field(default_factory=list)
    months: List[str] = field(default_factory=list)
    acceptance: Dict[str, float] = field(default_factory=dict)

    @property
    def n_chains(self) -> int:
        return int(self.beta0.shape[0])

    @property
    def n_draws(self) -> int:
        return int(self.beta0.shape[1])

    def scalar(self, name: str) -> np.ndarray:
        if name not in HYPERPARAMETERS:
            raise ValueError(f"unknown hyperparameter '{name}'")
        return getattr(self, name)

    def mu(self) -> np.ndarray:
        """(chain, draw, N, T) draws of mu_it = exp(beta_i + w_it)."""
        return np.exp(self.beta[..., None] + self.w)


# ---------------------------------------------------------------------------
# Adaptation
# ---------------------------------------------------------------------------


class _Scale:
    """Log proposal scales for a block of coordinates, batch-adapted."""

    def __init__(self, shape, initial: float) -> None:
        self.log_step = np.full(shape, math.log(initial))
        self.accepted = np.zeros(shape)
        self.total = np.zeros(shape)
        self.batch_accepted = np.zeros(shape)

    @property
    def step(self) -> np.ndarray:
        return np.exp(self.log_step)

    def record(self, accepted, adapting: bool) -> None:
        self.accepted += accepted
        self.total += 1
        if adapting:
            self.batch_accepted += accepted

    def adapt(self, batch: int, batch_size: int, target: float) -> None:
        delta = min(0.01, 1.0 / math.sqrt(batch))
        rate = self.batch_accepted / batch_size
        self.log_step += np.where(rate > target, delta, -delta)
        self.batch_accepted[...] = 0.0

    def rate(self) -> float:
        total = float(self.total.sum())
        return float(self.accepted.sum()) / total if total else float("nan")


# ---------------------------------------------------------------------------
# One chain
# ---------------------------------------------------------------------------


def initial_state(panel: PanelData, rng: np.random.Generator) -> ModelState:
    """Data-informed, jittered starting point inside the prior support."""
    observed = panel.observed
    log_y = np.where(observed, np.log(np.where(observed, panel.y, 1.0)), np.nan)
    overall = float(np.nanmean(log_y)) if observed.any() else 0.0
    counts = observed.sum(axis=1)
    sums = np.nansum(log_y, axis=1)
    beta = np.where(counts > 0, sums / np.maximum(counts, 1), overall)
    beta = beta + rng.normal(0.0, 0.1, size=beta.shape)
    spread = float(np.var(beta)) if beta.size > 1 else 0.1
    return ModelState(
        beta0=overall + float(rng.normal(0.0, 0.1)),
        sigma2_beta=float(np.clip(spread, 0.01, 10.0)) * math.exp(rng.normal(0.0, 0.1)),
        sigma2_xi=0.05 * math.exp(rng.normal(0.0, 0.1)),
        tau=5.0 * math.exp(rng.normal(0.0, 0.1)),
        beta=beta,
        w=np.zeros(panel.y.shape),
    )


def _diagnose(state: ModelState, panel: PanelData) -> Dict[str, float]:
    cells = loglik_cells(panel.y, panel.observed, state.beta[:, None] + state.w, state.tau)
    return {
        "beta0": state.beta0,
        "sigma2_beta": state.sigma2_beta,
        "sigma2_xi": state.sigma2_xi,
        "tau": state.tau,
        "loglik": float(cells.sum()),
        "log_posterior": log_posterior(state, panel),
    }


def _accept(rng: np.random.Generator, log_ratio):
    log_ratio = np.asarray(log_ratio, dtype=float)
    return np.log(rng.random(log_ratio.shape)) < log_ratio


def _run_chain(panel: PanelData, schedule: McmcSchedule, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    state = initial_state(panel, rng)
    if not np.isfinite(log_posterior(state, panel)):
        diagnostic = _diagnose(state, panel)
        logger.error(f"MCMC initialization failed: {diagnostic}")
        raise InitializationError("non-finite log posterior at initialization", diagnostic)

    y, observed = panel.y, panel.observed
    n, t_len = y.shape
    scales = {
        "beta0": _Scale((), 0.1),
        "sigma2_beta": _Scale((), 0.3),
        "sigma2_xi": _Scale((), 0.3),
        "tau": _Scale((), 0.3),
        "beta": _Scale((n,), 0.1),
        "w": _Scale((n, t_len), 0.1),
    }
    parity = np.arange(t_len) % 2

    n_draws = schedule.draws_per_chain
    out = {
        "beta0": np.empty(n_draws),
        "sigma2_beta": np.empty(n_draws),
        "sigma2_xi": np.empty(n_draws),
        "tau": np.empty(n_draws),
        "beta": np.empty((n_draws, n)),
        "w": np.empty((n_draws, n, t_len)),
    }

    cells = loglik_cells(y, observed, state.beta[:, None] + state.w, state.tau)
    total_iter = schedule.burn_in + schedule.n_keep
    kept = 0

    for it in range(total_iter):
        adapting = it < schedule.burn_in

        # 1. beta_0 | beta, sigma2_beta
        s = scales["beta0"]
        prop = state.beta0 + s.step * rng.normal()
        log_ratio = (
            normal_logpdf(state.beta, prop, state.sigma2_beta).sum()
            - normal_logpdf(state.beta, state.beta0, state.sigma2_beta).sum()
            + normal_logpdf(prop, 0.0, BETA0_PRIOR_VAR)
            - normal_logpdf(state.beta0, 0.0, BETA0_PRIOR_VAR)
        )
        ok = bool(_accept(rng, log_ratio))
        if ok:
            state.beta0 = float(prop)
        s.record(ok, adapting)

        # 2. sigma2_beta | beta, beta_0
        s = scales["sigma2_beta"]
        prop = state.sigma2_beta * math.exp(s.step * rng.normal())
        ok = False
        if prop < SIGMA2_UPPER:
            log_ratio = (
                normal_logpdf(state.beta, state.beta0, prop).sum()
                - normal_logpdf(state.beta, state.beta0, state.sigma2_beta).sum()
                + math.log(prop / state.sigma2_beta)
            )
            ok = bool(_accept(rng, log_ratio))
        if ok:
            state.sigma2_beta = float(prop)
        s.record(ok, adapting)

        # 3. sigma2_xi | w
        s = scales["sigma2_xi"]
        prop = state.sigma2_xi * math.exp(s.step * rng.normal())
        ok = False
        if prop < SIGMA2_UPPER:
            incr = walk_increments(state.w)
            log_ratio = (
                normal_logpdf(incr, 0.0, prop).sum()
                - normal_logpdf(incr, 0.0, state.sigma2_xi).sum()
                + math.log(prop / state.sigma2_xi)
            )
            ok = bool(_accept(rng, log_ratio))
        if ok:
            state.sigma2_xi = float(prop)
        s.record(ok, adapting)

        # 4. tau | y, mu
        s = scales["tau"]
        prop = state.tau * math.exp(s.step * rng.normal())
        ok = False
        if prop < TAU_UPPER:
            prop_cells = loglik_cells(y, observed, state.beta[:, None] + state.w, prop)
            log_ratio = prop_cells.sum() - cells.sum() + math.log(prop / state.tau)
            ok = bool(_accept(rng, log_ratio))
            if ok:
                cells = prop_cells
        if ok:
            state.tau = float(prop)
        s.record(ok, adapting)

        # 5. beta_i | y_i, w_i, beta_0, sigma2_beta
        s = scales["beta"]
        prop = state.beta + s.step * rng.normal(size=n)
        prop_cells = loglik_cells(y, observed, prop[:, None] + state.w, state.tau)
        log_ratio = (
            prop_cells.sum(axis=1)
            - cells.sum(axis=1)
            + normal_logpdf(prop, state.beta0, state.sigma2_beta)
            - normal_logpdf(state.beta, state.beta0, state.sigma2_beta)
        )
        ok = _accept(rng, log_ratio)
        state.beta = np.where(ok, prop, state.beta)
        cells = np.where(ok[:, None], prop_cells, cells)
        s.record(ok, adapting)

        # 6. w_it | neighbours, y_it; cells of one parity are conditionally independent
        s = scales["w"]
        w_ok = np.zeros((n, t_len), dtype=bool)
        for p in (1, 0):
            block = parity == p
            prop_w = state.w.copy()
            prop_w[:, block] += s.step[:, block] * rng.normal(size=(n, int(block.sum())))
            prop_cells = loglik_cells(y, observed, state.beta[:, None] + prop_w, state.tau)
            cur_walk = normal_logpdf(walk_increments(state.w), 0.0, state.sigma2_xi)
            new_walk = normal_logpdf(walk_increments(prop_w), 0.0, state.sigma2_xi)
            # increments touching column t are (t-1 -> t) and (t -> t+1)
            delta_walk = new_walk - cur_walk
            local = delta_walk.copy()
            local[:, :-1] += delta_walk[:, 1:]
            log_ratio = prop_cells - cells + local
            ok = _accept(rng, log_ratio) & block[None, :]
            state.w = np.where(ok, prop_w, state.w)
            cells = np.where(ok, prop_cells, cells)
            w_ok |= ok
        s.record(w_ok, adapting)

        if adapting and (it + 1) % schedule.adapt_batch == 0:
            batch = (it + 1) // schedule.adapt_batch
            for scale in scales.values():
                scale.adapt(batch, schedule.adapt_batch, schedule.target_accept)

        if not adapting and (it - schedule.burn_in + 1) % schedule.thin == 0 and kept < n_draws:
            out["beta0"][kept] = state.beta0
            out["sigma2_beta"][kept] = state.sigma2_beta
            out["sigma2_xi"][kept] = state.sigma2_xi
            out["tau"][kept] = state.tau
            out["beta"][kept] = state.beta
            out["w"][kept] = state.w
            kept += 1

    out["acceptance"] = {name: scale.rate() for name, scale in scales.items()}
    return out


def _chain_job(args) -> dict:
    y, household_ids, months, schedule, seed = args
    panel = PanelData(y=y, household_ids=household_ids, months=months)
    return _run_chain(panel, schedule, seed)


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------


def chain_seeds(seed: int, n_chains: int) -> List[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n_chains)]


def run_mcmc(
    panel: PanelData,
    schedule: Optional[McmcSchedule] = None,
    seed: int = 0,
    n_jobs: int = 1,
) -> PosteriorDraws:
    """
    Sample the posterior with independent chains.

    Args:
        panel:    N x T panel (N >= 1, T >= 2).
        schedule: Burn-in, kept iterations, thinning and chain count.
        seed:     Master seed; chain seeds are spawned from it.
        n_jobs:   Worker processes (chains are independent).

    Returns:
        PosteriorDraws with floor(n_keep / thin) draws per chain.

    Raises:
        ValueError:          T < 2.
        InitializationError: a chain starts at a non-finite log posterior.
    """
    schedule = schedule or McmcSchedule()
    if panel.n_months < 2:
        raise ValueError("the random-walk model needs at least 2 months")

    seeds = chain_seeds(seed, schedule.n_chains)
    logger.info(
        f"MCMC: {schedule.n_chains} chain(s) x ({schedule.burn_in} burn-in + "
        f"{schedule.n_keep} kept, thin {schedule.thin}) on a "
        f"{panel.n_households}x{panel.n_months} panel."
    )
    jobs = [(panel.y, panel.household_ids, panel.months, schedule, s) for s in seeds]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            chains = list(pool.map(_chain_job, jobs))
    else:
        chains = [_chain_job(job) for job in jobs]

    acceptance = {
        name: float(np.mean([c["acceptance"][name] for c in chains]))
        for name in chains[0]["acceptance"]
    }
    logger.info(f"MCMC acceptance rates: {acceptance}")
    return PosteriorDraws(
        beta0=np.stack([c["beta0"] for c in chains]),
        sigma2_beta=np.stack([c["sigma2_beta"] for c in chains]),
        sigma2_xi=np.stack([c["sigma2_xi"] for c in chains]),
        tau=np.stack([c["tau"] for c in chains]),
        beta=np.stack([c["beta"] for c in chains]),
        w=np.stack([c["w"] for c in chains]),
        seeds=seeds,
        schedule=schedule,
        household_ids=list(panel.household_ids),
        months=list(panel.months),
        acceptance=acceptance,
    )
