"""
tests/integration/test_cli.py
-----------------------------
Integration tests for the command-line interface.
Handlers run for real on tiny inputs; slow stages are mocked where only the
error mapping is under test.
"""

import json
from unittest.mock import patch

import pytest

from src.bayes_rw.sampler import InitializationError
from src.cli import build_parser, main


@pytest.fixture()
def simulated(tmp_path):
    code = main(["simulate", "--households", "2", "--months", "2021-01", "--out", str(tmp_path), "--seed", "3"])
    assert code == 0
    return tmp_path


# ---------------------------------------------------------------------------
# Tests
# ---------------------------------------------------------------------------


class TestParser:

    def test_subcommands_registered(self):
        parser = build_parser()
        args = parser.parse_args(["estimate", "--input-space", "both", "--g-max", "6"])
        assert args.command == "estimate"
        assert args.g_max == 6

    def test_no_command_prints_help(self, capsys):
        assert main([]) == 2
        assert "usage" in capsys.readouterr().out

    def test_unknown_option_is_usage_error(self):
        assert main(["estimate", "--input-space", "pixels"]) == 2


class TestSimulateAndFeatures:

    def test_simulate_reports_json(self, tmp_path, capsys):
        code = main(["simulate", "--households", "2", "--months", "2021-01,2021-02", "--out", str(tmp_path)])
        assert code == 0
        result = json.loads(capsys.readouterr().out)
        assert result["household_months"] == 4
        assert (tmp_path / "sessions.csv").exists()

    def test_bad_profile_counts(self, tmp_path, capsys):
        code = main(["simulate", "--households", "2", "--profile-counts", "1", "--out", str(tmp_path)])
        assert code == 2
        assert "INVALID_SIMULATION" in capsys.readouterr().err

    def test_features_and_show_unit(self, simulated, capsys):
        capsys.readouterr()
        code = main(
            ["features", str(simulated / "sessions.csv"), "--out", str(simulated), "--show-unit", "hh000:2021-01:1"]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "Session duration" in out
        assert "97.5% quantile" in out

    def test_unknown_unit(self, simulated, capsys):
        code = main(
            ["features", str(simulated / "sessions.csv"), "--out", str(simulated), "--show-unit", "nobody:2021-01:1"]
        )
        assert code == 2
        assert "UNKNOWN_UNIT" in capsys.readouterr().err

    def test_features_without_inputs(self, tmp_path, capsys):
        assert main(["features", "--out", str(tmp_path)]) == 2
        assert "MISSING_INPUT" in capsys.readouterr().err

    def test_features_missing_file(self, tmp_path, capsys):
        assert main(["features", str(tmp_path / "absent.csv"), "--out", str(tmp_path)]) == 2
        assert "Input not found" in capsys.readouterr().err


class TestErrors:

    def test_invalid_structure_is_usage_error(self, tmp_path, capsys):
        assert main(["estimate", "--structures", "XYZ", "--out", str(tmp_path)]) == 2
        assert "INVALID_CONFIG" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["estimate", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == 2
        assert "MISSING_CONFIG" in capsys.readouterr().err

    def test_estimate_before_features(self, tmp_path, capsys):
        assert main(["estimate", "--out", str(tmp_path)]) == 2
        assert "features" in capsys.readouterr().err

    def test_mcmc_initialization_failure_is_fatal(self, tmp_path, capsys):
        error = InitializationError("non-finite log posterior at initialization", {"tau": 80.0})
        with patch("src.pipeline.run_uncertainty", side_effect=error):
            assert main(["uncertainty", "--out", str(tmp_path)]) == 1
        err = capsys.readouterr().err
        assert "MCMC_INIT" in err
        assert "tau" in err

    def test_runtime_failure_is_fatal(self, tmp_path, capsys):
        with patch("src.pipeline.run_reduce", side_effect=RuntimeError("did not converge")):
            assert main(["reduce", "--out", str(tmp_path)]) == 1
        assert "error [FATAL]: did not converge" in capsys.readouterr().err

    def test_flags_reach_the_config(self, tmp_path):
        captured = {}

        def fake_estimate(config):
            captured["config"] = config
            return {}

        with patch("src.pipeline.run_estimate", side_effect=fake_estimate):
            code = main(
                [
                    "estimate", "--out", str(tmp_path), "--seed", "11", "--g-max", "5",
                    "--structures", "VVV,EII", "--n-init", "2", "--no-standardize",
                ]
            )
        assert code == 0
        config = captured["config"]
        assert config.seed == 11
        assert config.grid.g_max == 5
        assert config.grid.structures == ["EII", "VVV"]
        assert config.grid.n_init == 2
        assert config.standardize is False
