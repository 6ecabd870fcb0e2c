"""
tests/unit/test_gmm.py
----------------------
Unit tests for covariance structures, k-means++ starts, the EM steps and
the (structure, G) grid.
"""

from types import SimpleNamespace

import numpy as np
import pytest
from scipy.stats import multivariate_normal
from sklearn.metrics import adjusted_rand_score

from src.gmm import (
    STRUCTURES,
    CovStructure,
    FitFailedError,
    MixtureParams,
    bic,
    cell_seeds,
    check_structure,
    em_fit,
    estep,
    fit_grid,
    kmeans_start,
    mstep,
    n_cov_params,
    n_params,
    smooth_labels,
)
from src.synth.planted import planted_clusters


@pytest.fixture(scope="module")
def three_clusters():
    return planted_clusters(240, 3, 3, separation=10.0, seed=11)


@pytest.fixture(scope="module")
def two_clusters_2d():
    return planted_clusters(160, 2, 2, separation=8.0, seed=5)


@pytest.fixture(scope="module")
def three_clusters_4d():
    return planted_clusters(200, 3, 4, separation=6.0, seed=17)


def _params(weights, means, covariances):
    weights = np.asarray(weights, dtype=float)
    means = np.asarray(means, dtype=float)
    g, d = means.shape
    return MixtureParams(
        weights=weights,
        means=means,
        lam=np.ones(g),
        shape=np.ones((g, d)),
        orient=np.tile(np.eye(d), (g, 1, 1)),
        covariances=np.asarray(covariances, dtype=float),
    )


# ---------------------------------------------------------------------------
# Structures
# ---------------------------------------------------------------------------


class TestStructures:

    def test_fourteen_structures(self):
        assert len(STRUCTURES) == 14
        assert STRUCTURES[0] == "EII" and STRUCTURES[-1] == "VVV"

    def test_unknown_structure_raises(self):
        with pytest.raises(ValueError):
            CovStructure("XYZ")

    def test_letters(self):
        s = CovStructure("VEI")
        assert (s.volume, s.shape, s.orientation) == ("V", "E", "I")

    @pytest.mark.parametrize(
        "tag,expected",
        [("EII", 1), ("VII", 2), ("EEI", 3), ("VVI", 6), ("EEE", 6), ("VVV", 12), ("EEV", 9), ("VEE", 7)],
    )
    def test_covariance_parameter_counts(self, tag, expected):
        assert n_cov_params(tag, 2, 3) == expected

    def test_total_parameters(self):
        assert n_params("EII", 2, 2) == 1 + 4 + 1

    def test_check_structure_flags_unequal_volumes(self):
        sigmas = np.stack([np.eye(2), 4.0 * np.eye(2)])
        assert check_structure(sigmas, "VII") < 1e-12
        assert check_structure(sigmas, "EII") > 0.5

    @pytest.mark.parametrize("tag", ["EEI", "VEI", "EVI", "VVI"])
    def test_check_structure_accepts_diagonal(self, tag):
        sigmas = np.stack([np.diag([1.0, 2.0, 3.0, 4.0])])
        assert check_structure(sigmas, tag) < 1e-12

    def test_check_structure_flags_rotated_axes(self):
        sigmas = np.array([[[2.0, 0.5], [0.5, 1.0]]])
        assert check_structure(sigmas, "VVI") == pytest.approx(0.25)


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------


class TestInit:

    def test_smooth_labels(self):
        resp = smooth_labels(np.array([0, 1, 1]), 3)
        np.testing.assert_allclose(resp[0], [0.9, 0.05, 0.05])
        np.testing.assert_allclose(resp.sum(axis=1), 1.0)

    def test_single_component_is_all_ones(self):
        assert np.all(kmeans_start(np.zeros((4, 2)), 1, 0) == 1.0)

    def test_seeded_start_is_reproducible(self, three_clusters):
        x, _ = three_clusters
        np.testing.assert_array_equal(kmeans_start(x, 3, 7), kmeans_start(x, 3, 7))


# ---------------------------------------------------------------------------
# EM steps
# ---------------------------------------------------------------------------


class TestSteps:

    def test_bic_value(self):
        assert bic(SimpleNamespace(loglik=-100.0, n_params=5), 100) == pytest.approx(-223.0259, abs=1e-4)

    def test_mstep_empty_component_raises(self, two_clusters_2d):
        x, _ = two_clusters_2d
        resp = np.zeros((x.shape[0], 2))
        resp[:, 0] = 1.0
        with pytest.raises(FitFailedError, match="empty component"):
            mstep(x, resp, "VVV")

    def test_estep_rows_sum_to_one(self, two_clusters_2d):
        x, labels = two_clusters_2d
        params = mstep(x, smooth_labels(labels, 2), "VVV")
        resp, loglik = estep(x, params)
        np.testing.assert_allclose(resp.sum(axis=1), 1.0)
        assert np.isfinite(loglik)

    def test_estep_equidistant_point_is_split_evenly(self):
        params = _params([0.5, 0.5], [[-1.0, 0.0], [1.0, 0.0]], np.tile(np.eye(2), (2, 1, 1)))
        resp, _ = estep(np.array([[0.0, 3.0]]), params)
        np.testing.assert_allclose(resp, [[0.5, 0.5]], atol=1e-12)

    def test_estep_loglik_matches_direct_density_sum(self):
        rng = np.random.default_rng(21)
        x = rng.standard_normal((12, 3))
        means = rng.standard_normal((3, 3))
        factors = rng.standard_normal((3, 3, 3))
        covariances = np.einsum("gij,gkj->gik", factors, factors) + np.eye(3)
        weights = np.array([0.2, 0.3, 0.5])
        resp, loglik = estep(x, _params(weights, means, covariances))
        dens = np.column_stack(
            [w * multivariate_normal(m, c).pdf(x) for w, m, c in zip(weights, means, covariances)]
        )
        assert loglik == pytest.approx(np.sum(np.log(dens.sum(axis=1))), abs=1e-10)
        np.testing.assert_allclose(resp, dens / dens.sum(axis=1, keepdims=True), atol=1e-10)

    def test_single_component_responsibilities_are_one(self, two_clusters_2d):
        x, _ = two_clusters_2d
        resp, _ = estep(x, _params([1.0], [x.mean(axis=0)], [np.cov(x, rowvar=False)]))
        assert np.all(resp == 1.0)

    def test_mstep_eee_matches_vvv_for_equal_scatter(self):
        base = np.random.default_rng(3).standard_normal((40, 3))
        x = np.vstack([base, base + [15.0, -5.0, 2.0]])
        resp = np.repeat(np.eye(2), 40, axis=0)
        eee = mstep(x, resp, "EEE")
        vvv = mstep(x, resp, "VVV")
        np.testing.assert_allclose(eee.covariances, vvv.covariances, atol=1e-10)
        np.testing.assert_allclose(vvv.covariances[0], np.cov(base, rowvar=False, ddof=0), atol=1e-10)

    def test_mstep_eii_uses_pooled_trace(self, two_clusters_2d):
        x, _ = two_clusters_2d
        resp = np.full((x.shape[0], 2), 0.5)
        params = mstep(x, resp, "EII")
        expected = np.trace(np.cov(x, rowvar=False, ddof=0)) / 2
        np.testing.assert_allclose(params.covariances, np.tile(expected * np.eye(2), (2, 1, 1)))


# ---------------------------------------------------------------------------
# EM fits
# ---------------------------------------------------------------------------


class TestEmFit:

    def test_single_component_vvv_is_gaussian_mle(self, two_clusters_2d):
        x, _ = two_clusters_2d
        fit = em_fit(x, 1, "VVV")
        mean = x.mean(axis=0)
        cov = np.cov(x, rowvar=False, ddof=0)
        np.testing.assert_allclose(fit.means[0], mean)
        np.testing.assert_allclose(fit.covariances[0], cov)
        expected = multivariate_normal(mean, cov).logpdf(x).sum()
        assert fit.loglik == pytest.approx(expected)
        assert fit.converged
        assert fit.bic == pytest.approx(2 * expected - 5 * np.log(x.shape[0]))

    def test_single_component_eii_pools_variance(self, two_clusters_2d):
        x, _ = two_clusters_2d
        fit = em_fit(x, 1, "EII")
        pooled = np.var(x, axis=0).mean()
        np.testing.assert_allclose(fit.covariances[0], pooled * np.eye(2))

    def test_recovers_planted_partition(self, three_clusters):
        x, labels = three_clusters
        fit = em_fit(x, 3, "VVV", seed=1, n_init=2)
        assert not fit.failed
        assert adjusted_rand_score(labels, fit.labels) == pytest.approx(1.0)

    def test_bic_prefers_planted_count(self, three_clusters):
        x, _ = three_clusters
        scores = {g: em_fit(x, g, "EII", seed=3, n_init=2).bic for g in range(1, 6)}
        assert max(scores, key=scores.get) == 3

    @pytest.mark.parametrize("tag", STRUCTURES)
    def test_fitted_covariances_honour_structure(self, tag, two_clusters_2d):
        x, _ = two_clusters_2d
        fit = em_fit(x, 2, tag, seed=2, n_init=1, max_iter=200)
        assert not fit.failed
        assert check_structure(fit.covariances, tag) < 1e-6
        assert fit.n_params == n_params(tag, 2, 2)

    @pytest.mark.parametrize("tag", STRUCTURES)
    def test_four_dimensional_fits_honour_structure(self, tag, three_clusters_4d):
        x, _ = three_clusters_4d
        for g in range(1, 6):
            fit = em_fit(x, g, tag, seed=g, n_init=1)
            if fit.failed:
                continue
            assert check_structure(fit.covariances, tag) < 1e-6, g
            assert np.all(np.diff(fit.loglik_trace) >= -1e-8), g
            assert fit.n_params == n_params(tag, g, 4)

    @pytest.mark.parametrize("tag", ["VEI", "VEE", "EVE", "VVE", "VEV", "VVV"])
    def test_loglik_never_decreases(self, tag, three_clusters):
        x, _ = three_clusters
        fit = em_fit(x, 3, tag, seed=4, n_init=1, max_iter=100)
        trace = np.asarray(fit.loglik_trace)
        assert np.all(np.diff(trace) >= -1e-6 * np.abs(trace[1:]))

    def test_n_less_than_g_raises(self):
        with pytest.raises(ValueError, match="n < G"):
            em_fit(np.zeros((2, 2)), 3, "EII")

    def test_non_finite_data_raises(self):
        x = np.ones((5, 2))
        x[0, 0] = np.inf
        with pytest.raises(ValueError):
            em_fit(x, 1, "EII")

    def test_singular_fit_is_marked_failed(self):
        x = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0]])
        fit = em_fit(x, 2, "VVV", seed=0, n_init=1)
        assert fit.failed
        assert np.isnan(fit.bic)
        assert fit.to_summary()["bic"] is None


class TestGrid:

    def test_cell_seeds_are_deterministic(self):
        assert cell_seeds(9, 4) == cell_seeds(9, 4)
        assert len(set(cell_seeds(9, 4))) == 4

    def test_grid_order_and_job_independence(self, two_clusters_2d):
        x, _ = two_clusters_2d
        kwargs = dict(structures=["EII", "VVV"], g_values=[1, 2], seed=8, n_init=1, max_iter=100)
        serial = fit_grid(x, n_jobs=1, **kwargs)
        parallel = fit_grid(x, n_jobs=2, **kwargs)
        assert [(f.structure, f.n_components) for f in serial] == [("EII", 1), ("EII", 2), ("VVV", 1), ("VVV", 2)]
        np.testing.assert_allclose([f.bic for f in serial], [f.bic for f in parallel])


class TestEmCalibration:

    @pytest.mark.slow
    def test_random_datasets_keep_monotone_traces(self):
        for seed in range(20):
            x = np.random.default_rng(seed).standard_normal((200, 4))
            for tag in STRUCTURES:
                for g in range(1, 6):
                    fit = em_fit(x, g, tag, seed=seed, n_init=1)
                    if fit.failed:
                        continue
                    assert np.all(np.diff(fit.loglik_trace) >= -1e-8), (seed, tag, g)
                    assert check_structure(fit.covariances, tag) < 1e-6, (seed, tag, g)

    @pytest.mark.slow
    def test_bic_selects_planted_count_on_most_seeds(self):
        hits = 0
        for seed in range(20):
            x, _ = planted_clusters(150, 3, 2, separation=10.0, seed=seed)
            grid = fit_grid(x, structures=["EII", "VII", "EEE", "VVV"], g_values=range(1, 6), seed=seed, n_init=2)
            best = max((f for f in grid if not f.failed), key=lambda f: f.bic)
            hits += best.n_components == 3
        assert hits >= 18
