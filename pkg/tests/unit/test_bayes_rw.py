"""
tests/unit/test_bayes_rw.py
---------------------------
Unit tests for the random-walk panel model, its sampler and the posterior
summaries.
"""

import math
from unittest.mock import patch

import numpy as np
import pandas as pd
import pytest
from scipy.stats import norm

from src.bayes_rw import (
    InitializationError,
    ModelState,
    PanelData,
    log_posterior,
    panel_from_estimates,
    plot_data,
    posterior_predictive,
    run_mcmc,
    summarize,
    trunc_gamma_logpdf,
    write_draws,
)
from src.bayes_rw.model import walk_increments
from src.config import McmcSchedule
from src.synth.panel import gen_panel

QUICK = McmcSchedule(burn_in=200, n_keep=400, thin=2, n_chains=2, adapt_batch=50)


def _state(n=2, t_len=3, **overrides):
    values = dict(
        beta0=0.5,
        sigma2_beta=0.2,
        sigma2_xi=0.05,
        tau=10.0,
        beta=np.full(n, 0.6),
        w=np.zeros((n, t_len)),
    )
    values.update(overrides)
    return ModelState(**values)


@pytest.fixture(scope="module")
def small_panel():
    panel, _ = gen_panel(4, 3, seed=3)
    return panel


@pytest.fixture(scope="module")
def quick_draws(small_panel):
    return run_mcmc(small_panel, QUICK, seed=7)


class TestPanelData:

    def test_default_labels(self):
        panel = PanelData(y=np.array([[1.0, 2.0], [np.nan, 3.0]]))
        assert panel.household_ids == ["0", "1"]
        assert panel.observed.tolist() == [[True, True], [False, True]]

    def test_values_below_one_are_rejected(self):
        with pytest.raises(ValueError):
            PanelData(y=np.array([[0.5, 2.0]]))

    def test_label_mismatch_is_rejected(self):
        with pytest.raises(ValueError):
            PanelData(y=np.ones((2, 2)), household_ids=["a"])

    def test_from_estimates_fills_missing_cells(self):
        estimates = pd.DataFrame(
            {"household_id": ["b", "a", "a"], "month": ["2021-02", "2021-01", "2021-02"], "g_hat": [2.0, 1.5, 3.0]}
        )
        panel = panel_from_estimates(estimates)
        assert panel.household_ids == ["a", "b"]
        assert panel.months == ["2021-01", "2021-02"]
        assert math.isnan(panel.y[1, 0])
        assert panel.y[0, 1] == 3.0


class TestModel:

    def test_walk_increments_anchor_at_zero(self):
        np.testing.assert_allclose(walk_increments(np.array([[1.0, 3.0, 6.0]])), [[1.0, 2.0, 3.0]])

    def test_outside_support_is_impossible(self):
        panel = PanelData(y=np.full((2, 3), 2.0))
        assert log_posterior(_state(tau=60.0), panel) == -np.inf
        assert log_posterior(_state(sigma2_xi=0.0), panel) == -np.inf

    def test_log_posterior_sums_terms(self):
        y = np.array([[2.0, np.nan, 3.0], [1.0, 1.5, 4.0]])
        panel = PanelData(y=y)
        state = _state(w=np.array([[0.1, 0.0, -0.2], [0.0, 0.3, 0.1]]))

        log_mu = state.beta[:, None] + state.w
        observed = ~np.isnan(y)
        loglik = sum(
            trunc_gamma_logpdf(y[i, t], math.exp(log_mu[i, t]), state.tau)
            for i, t in zip(*np.nonzero(observed))
        )
        walk = norm.logpdf(walk_increments(state.w), 0.0, math.sqrt(state.sigma2_xi)).sum()
        intercepts = norm.logpdf(state.beta, state.beta0, math.sqrt(state.sigma2_beta)).sum()
        prior = norm.logpdf(state.beta0, 0.0, 10.0) - 2 * math.log(100.0) - math.log(50.0)
        assert log_posterior(state, panel) == pytest.approx(loglik + walk + intercepts + prior)


class TestSampler:

    def test_single_month_is_rejected(self):
        with pytest.raises(ValueError):
            run_mcmc(PanelData(y=np.full((3, 1), 2.0)), QUICK)

    def test_draw_shapes(self, quick_draws):
        assert quick_draws.n_chains == 2
        assert quick_draws.n_draws == 200
        assert quick_draws.w.shape == (2, 200, 4, 3)
        assert quick_draws.mu().shape == (2, 200, 4, 3)
        assert np.all(quick_draws.tau > 0) and np.all(quick_draws.tau < 50)

    def test_same_seed_same_draws(self, small_panel, quick_draws):
        again = run_mcmc(small_panel, QUICK, seed=7)
        np.testing.assert_array_equal(again.beta0, quick_draws.beta0)
        np.testing.assert_array_equal(again.w, quick_draws.w)

    def test_parallel_chains_match_serial(self, small_panel, quick_draws):
        parallel = run_mcmc(small_panel, QUICK, seed=7, n_jobs=2)
        np.testing.assert_array_equal(parallel.beta, quick_draws.beta)

    def test_acceptance_rates_are_recorded(self, quick_draws):
        assert set(quick_draws.acceptance) == {"beta0", "sigma2_beta", "sigma2_xi", "tau", "beta", "w"}
        assert all(0.0 < rate < 1.0 for rate in quick_draws.acceptance.values())

    def test_missing_cells_still_get_draws(self):
        panel, _ = gen_panel(3, 4, missing_rate=0.3, seed=11)
        draws = run_mcmc(panel, QUICK, seed=1)
        assert np.all(np.isfinite(draws.mu()))

    def test_bad_start_raises_with_diagnostic(self, small_panel):
        with patch("src.bayes_rw.sampler.initial_state", return_value=_state(n=4, tau=80.0)):
            with pytest.raises(InitializationError) as excinfo:
                run_mcmc(small_panel, QUICK)
        assert excinfo.value.diagnostic["tau"] == 80.0
        assert excinfo.value.diagnostic["log_posterior"] == -np.inf


class TestSummary:

    def test_cells_and_diagnostics(self, quick_draws):
        summary = summarize(quick_draws)
        assert list(summary.cells.columns) == ["household_id", "month", "post_mean", "ci_lo", "ci_hi"]
        assert len(summary.cells) == 12
        assert np.all(summary.cells["ci_lo"] <= summary.cells["post_mean"])
        assert np.all(summary.cells["post_mean"] <= summary.cells["ci_hi"])
        params = summary.diagnostics["parameter"].tolist()
        assert params[:4] == ["beta0", "sigma2_beta", "sigma2_xi", "tau"]
        assert len(params) == 4 + 4
        assert np.all(np.isfinite(summary.diagnostics["rhat"]))

    def test_single_chain_is_rejected(self, quick_draws):
        draws = quick_draws
        single = type(draws)(
            beta0=draws.beta0[:1],
            sigma2_beta=draws.sigma2_beta[:1],
            sigma2_xi=draws.sigma2_xi[:1],
            tau=draws.tau[:1],
            beta=draws.beta[:1],
            w=draws.w[:1],
            seeds=draws.seeds[:1],
            schedule=draws.schedule,
            household_ids=draws.household_ids,
            months=draws.months,
        )
        with pytest.raises(ValueError):
            summarize(single)

    def test_posterior_predictive_and_plot_data(self, small_panel, quick_draws):
        replicated = posterior_predictive(quick_draws, np.random.default_rng(0), max_draws=100)
        assert replicated.shape == (100, 4, 3)
        assert np.all(replicated >= 1.0)
        frame = plot_data(small_panel, summarize(quick_draws), replicated)
        assert list(frame.columns) == [
            "household_id", "month", "g_hat", "post_mean", "ci_lo", "ci_hi", "pp_lo", "pp_hi"
        ]
        np.testing.assert_allclose(frame["g_hat"], small_panel.y.ravel())

    def test_write_draws_long_format(self, tmp_path, quick_draws):
        path = write_draws(quick_draws, tmp_path / "draws.csv")
        frame = pd.read_csv(path)
        assert list(frame.columns) == ["chain", "iteration", "parameter", "value"]
        # 4 hyperparameters + 4 intercepts + 12 walk cells, 2 x 200 draws each
        assert len(frame) == (4 + 4 + 12) * 400

    def test_missing_months_get_wider_intervals(self):
        panel, _ = gen_panel(12, 8, missing_rate=0.25, seed=31)
        schedule = McmcSchedule(burn_in=1000, n_keep=3000, thin=3, n_chains=2, adapt_batch=50)
        cells = summarize(run_mcmc(panel, schedule, seed=2)).cells
        width = (cells["ci_hi"] - cells["ci_lo"]).to_numpy().reshape(panel.y.shape)

        comparisons = []
        for i, t in zip(*np.nonzero(~panel.observed)):
            seen = np.nonzero(panel.observed[i])[0]
            if seen.size == 0:
                continue
            nearest = seen[np.argmin(np.abs(seen - t))]
            comparisons.append(width[i, t] >= width[i, nearest])
        assert comparisons
        assert np.mean(comparisons) >= 0.8


@pytest.mark.slow
class TestRecovery:

    def test_simulated_panel_is_covered(self):
        panel, truth = gen_panel(20, 6, beta0=1.0, sigma_beta=0.3, sigma_xi=0.1, tau=20.0, seed=21)
        schedule = McmcSchedule(burn_in=3000, n_keep=6000, thin=5, n_chains=2)
        draws = run_mcmc(panel, schedule, seed=5)
        summary = summarize(draws)

        cells = summary.cells
        true_mu = truth.mu.ravel()
        covered = (cells["ci_lo"].to_numpy() <= true_mu) & (true_mu <= cells["ci_hi"].to_numpy())
        assert covered.mean() >= 0.8

        beta0 = summary.diagnostics.set_index("parameter").loc["beta0"]
        assert beta0["ci_lo"] - 0.2 <= truth.beta0 <= beta0["ci_hi"] + 0.2

    def test_prior_only_run_returns_the_beta0_prior(self):
        panel = PanelData(y=np.full((1, 2), np.nan))
        draws = run_mcmc(panel, McmcSchedule(), seed=13, n_jobs=4)
        assert abs(draws.beta0.mean()) < 0.5
        assert draws.beta0.std() == pytest.approx(math.sqrt(100.0), rel=0.1)

    def test_hyperparameters_are_covered_across_seeds(self):
        schedule = McmcSchedule(burn_in=2000, n_keep=4000, thin=5, n_chains=4)
        covered = {name: 0 for name in ("beta0", "sigma2_beta", "sigma2_xi", "tau")}
        mixed = 0
        for seed in range(50):
            panel, truth = gen_panel(30, 10, beta0=1.0, sigma_beta=0.3, sigma_xi=0.2, tau=20.0, seed=seed)
            summary = summarize(run_mcmc(panel, schedule, seed=1000 + seed, n_jobs=4))
            table = summary.diagnostics.set_index("parameter")
            for name, value in truth.hyperparameters.items():
                covered[name] += table.loc[name, "ci_lo"] <= value <= table.loc[name, "ci_hi"]
            mixed += table.loc[list(covered), "rhat"].max() < 1.05
        assert all(count >= 40 for count in covered.values()), covered
        assert mixed >= 45
