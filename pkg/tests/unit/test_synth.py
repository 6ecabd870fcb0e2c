"""
tests/unit/test_synth.py
------------------------
Unit tests for the synthetic session, panel and planted-structure generators.
"""

import numpy as np
import pandas as pd
import pytest

from src.ingest.sessions import group_by_household_month, parse_sessions
from src.synth import (
    HouseholdSpec,
    ProfileSpec,
    block_loadings,
    default_household_specs,
    gen_panel,
    gen_sessions,
    planted_clusters,
    planted_factors,
    template_profile,
    write_ground_truth,
)


class TestProfiles:

    def test_template_uses_own_channels(self):
        profile = template_profile(2)
        assert profile.channels == ("ch2_0", "ch2_1", "ch2_2", "ch2_3")
        np.testing.assert_allclose(profile.transitions.sum(axis=1), 1.0)

    def test_bad_transition_matrix_raises(self):
        with pytest.raises(ValueError):
            ProfileSpec(
                channels=("a", "b"),
                transitions=np.array([[0.5, 0.6], [0.5, 0.5]]),
                duration_logmean=5.0,
                duration_logsd=0.3,
                ratio_alpha=1.0,
                ratio_beta=1.0,
                sessions_per_day=2.0,
            )

    def test_selection_must_be_simplex(self):
        with pytest.raises(ValueError):
            HouseholdSpec("hh1", [template_profile(0), template_profile(1)], np.array([0.7, 0.7]))

    def test_default_specs(self):
        specs = default_household_specs(3, ["2021-01"], seed=1, profile_counts=[1, 2, 3])
        assert [s.household_id for s in specs] == ["hh000", "hh001", "hh002"]
        assert [len(s.profiles) for s in specs] == [1, 2, 3]

    def test_profile_count_out_of_range(self):
        with pytest.raises(ValueError):
            default_household_specs(1, ["2021-01"], profile_counts=[9])


class TestGenSessions:

    @pytest.fixture(scope="class")
    def generated(self):
        specs = default_household_specs(3, ["2021-01", "2021-02"], seed=4, profile_counts=[1, 2, 3])
        return gen_sessions(specs, seed=4)

    def test_logs_parse_cleanly(self, generated):
        text, _ = generated
        result = parse_sessions(text)
        assert result.rejections == []
        groups = group_by_household_month(result.records)
        assert len(groups) == 6

    def test_every_day_is_active(self, generated):
        text, _ = generated
        groups = group_by_household_month(parse_sessions(text).records)
        january = [g for g in groups if g.month == "2021-01"][0]
        assert len({s.start_time.day for s in january.sessions}) == 31

    def test_truth_counts_profiles_used(self, generated):
        _, truth = generated
        assert list(truth.columns) == ["household_id", "month", "true_k"]
        single = truth[truth["household_id"] == "hh000"]
        assert single["true_k"].tolist() == [1, 1]
        assert truth["true_k"].between(1, 3).all()

    def test_same_seed_same_logs(self):
        specs = default_household_specs(2, ["2021-03"], seed=2)
        assert gen_sessions(specs, seed=9)[0] == gen_sessions(specs, seed=9)[0]

    def test_write_ground_truth(self, tmp_path, generated):
        _, truth = generated
        path = write_ground_truth(truth, tmp_path / "truth.csv")
        back = pd.read_csv(path, dtype={"household_id": str, "month": str})
        pd.testing.assert_frame_equal(back, truth)


class TestGenPanel:

    def test_shapes_and_support(self):
        panel, truth = gen_panel(5, 4, seed=1)
        assert panel.y.shape == (5, 4)
        assert np.all(panel.y >= 1.0)
        assert truth.mu.shape == (5, 4)

    def test_missing_rate_blanks_cells(self):
        panel, _ = gen_panel(40, 10, missing_rate=0.5, seed=2)
        assert 0.3 < np.isnan(panel.y).mean() < 0.7

    def test_hyperparameters_on_variance_scale(self):
        _, truth = gen_panel(2, 2, sigma_beta=0.5, sigma_xi=0.1, seed=3)
        assert truth.hyperparameters["sigma2_beta"] == pytest.approx(0.25)
        assert truth.hyperparameters["sigma2_xi"] == pytest.approx(0.01)

    def test_large_tau_outside_prior_is_allowed(self, caplog):
        panel, _ = gen_panel(3, 3, tau=1e4, seed=4)
        assert np.all(panel.y >= 1.0)
        assert "outside the prior support" in caplog.text

    def test_invalid_sizes_raise(self):
        with pytest.raises(ValueError):
            gen_panel(0, 3)


class TestPlanted:

    def test_cluster_labels_are_balanced(self):
        x, labels = planted_clusters(90, 3, 4, seed=0)
        assert x.shape == (90, 4)
        assert np.bincount(labels).tolist() == [30, 30, 30]

    def test_centres_are_separated(self):
        x, labels = planted_clusters(3000, 2, 2, separation=10.0, seed=1)
        centres = np.array([x[labels == k].mean(axis=0) for k in range(2)])
        assert np.linalg.norm(centres[0] - centres[1]) == pytest.approx(10.0, rel=0.05)

    def test_block_loadings(self):
        loadings = block_loadings(6, 2, 0.7)
        assert loadings[:, 0].tolist() == [0.7, 0.0, 0.7, 0.0, 0.7, 0.0]

    def test_exact_factors_reproduce_correlation(self):
        loadings = block_loadings(8, 2, 0.8)
        x, _ = planted_factors(200, loadings, seed=3, exact=True)
        implied = loadings @ loadings.T
        np.fill_diagonal(implied, 1.0)
        np.testing.assert_allclose(np.corrcoef(x, rowvar=False), implied, atol=1e-10)

    def test_communality_above_one_raises(self):
        with pytest.raises(ValueError):
            planted_factors(50, np.full((3, 2), 0.9))
