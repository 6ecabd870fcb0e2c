"""
tests/unit/test_config.py
-------------------------
Unit tests for run configuration defaults, validation and layering.
"""

import json
from unittest.mock import patch

import pytest
from pydantic import ValidationError

from src.config import GridSettings, McmcSchedule, RunConfig, load_config
from src.gmm.structures import STRUCTURES


class TestDefaults:

    def test_documented_defaults(self):
        with patch.dict("os.environ", {}, clear=True):
            config = RunConfig()
        assert config.seed == 42
        assert config.out_dir == "out"
        assert config.n_jobs == 1
        assert config.aggregation == "day"
        assert config.input_space == "raw"
        assert config.grid.g_max == 15
        assert config.grid.structures == list(STRUCTURES)
        assert config.mcmc.burn_in == 10_000
        assert config.mcmc.draws_per_chain == 20_000 // 15

    def test_environment_overrides_defaults(self):
        env = {"PROFILES_SEED": "7", "PROFILES_N_JOBS": "3", "PROFILES_LOG_LEVEL": "debug"}
        with patch.dict("os.environ", env, clear=True):
            config = RunConfig()
        assert (config.seed, config.n_jobs, config.log_level) == (7, 3, "DEBUG")

    def test_bad_environment_integer(self):
        with patch.dict("os.environ", {"PROFILES_SEED": "abc"}, clear=True):
            with pytest.raises(ValueError):
                RunConfig()


class TestValidation:

    def test_structures_keep_canonical_order(self):
        assert GridSettings(structures=["VVV", "EII"]).structures == ["EII", "VVV"]

    def test_unknown_structure(self):
        with pytest.raises(ValidationError):
            GridSettings(structures=["ABC"])

    def test_g_bounds(self):
        with pytest.raises(ValidationError):
            GridSettings(g_max=16)
        with pytest.raises(ValidationError):
            GridSettings(g_min=5, g_max=3)

    def test_schedule_needs_a_draw(self):
        with pytest.raises(ValidationError):
            McmcSchedule(n_keep=10, thin=20)

    def test_schedule_needs_two_chains(self):
        with pytest.raises(ValidationError):
            McmcSchedule(n_chains=1)

    def test_aggregation_rule_is_checked(self):
        with pytest.raises(ValidationError):
            RunConfig(aggregation="week")
        assert RunConfig(aggregation=" window:5 ").aggregation == "window:5"


class TestLoadConfig:

    def test_file_then_overrides(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"seed": 3, "grid": {"g_max": 6, "n_init": 2}}), encoding="utf-8")
        config = load_config(path, {"seed": 9, "grid": {"g_max": None, "n_init": 4}, "out_dir": None})
        assert config.seed == 9
        assert config.grid.g_max == 6
        assert config.grid.n_init == 4

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_config(tmp_path / "absent.json")

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ValueError, match="not valid JSON"):
            load_config(path)

    def test_non_object_json(self, tmp_path):
        path = tmp_path / "list.json"
        path.write_text("[1, 2]", encoding="utf-8")
        with pytest.raises(ValueError):
            load_config(path)
