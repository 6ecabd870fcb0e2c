"""
main.py
-------
Command-line interface for the household profiling pipeline.

Commands
--------
simulate     → synthetic session logs + planted ground truth
features     → per-unit feature table (Step 1)
reduce       → pooled factor analysis and factor scores (Step 2)
estimate     → model-averaged profile counts per household-month (Step 3)
uncertainty  → random-walk posterior summaries and plot data (Step 4)
pipeline     → features → [reduce] → estimate → uncertainty

Exit codes: 0 success, 1 fatal error, 2 usage error or missing input.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import pandas as pd
from pydantic import ValidationError

from src import pipeline
from src.bayes_rw.sampler import InitializationError
from src.config import RunConfig, load_config
from src.features.matrix import FEATURE_NAMES, feature_table

logger = logging.getLogger(__name__)

EXIT_FATAL = 1
EXIT_USAGE = 2


class CommandError(RuntimeError):
    """Raised when a command cannot run; carries the process exit code."""

    def __init__(self, code: str, message: str, *, hint: Optional[str] = None, exit_code: int = EXIT_FATAL) -> None:
        super().__init__(message)
        self.code = code
        self.message = message
        self.hint = hint
        self.exit_code = exit_code


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="Master seed (env PROFILES_SEED, default 42)")
    common.add_argument("--out", help="Output directory (env PROFILES_OUT_DIR, default ./out)")
    common.add_argument("--config", help="JSON config file; CLI flags override it")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR (env PROFILES_LOG_LEVEL)")
    common.add_argument("--n-jobs", type=int, help="Worker processes (env PROFILES_N_JOBS, default 1)")
    return common


def _add_feature_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("inputs", nargs="*", help="Session-log CSV file(s)")
    parser.add_argument("--aggregation", help="Unit rule: 'day' (default) or 'window:<k>'")


def _add_estimate_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input-space", choices=["raw", "factor", "both"], help="Clustering input (default raw)")
    parser.add_argument(
        "--no-standardize", action="store_true", default=None, help="Cluster unscaled columns"
    )
    parser.add_argument("--g-max", type=int, help="Largest number of components (<= 15)")
    parser.add_argument("--structures", help="Comma-separated covariance structures (default all 14)")
    parser.add_argument("--n-init", type=int, help="k-means++ restarts per fit (default 5)")


def _add_mcmc_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--burn-in", type=int, help="Burn-in iterations per chain (default 10000)")
    parser.add_argument("--n-keep", type=int, help="Post burn-in iterations per chain (default 20000)")
    parser.add_argument("--thin", type=int, help="Thinning interval (default 15)")
    parser.add_argument("--chains", type=int, help="Number of chains (default 4)")
    parser.add_argument("--write-draws", action="store_true", default=None, help="Also write draws.csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="household-profiles",
        description="Estimate household TV-viewing profiles from set-top-box session logs.",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    common = _common_options()

    _register_simulate(subparsers, common)
    _register_features(subparsers, common)
    _register_reduce(subparsers, common)
    _register_estimate(subparsers, common)
    _register_uncertainty(subparsers, common)
    _register_pipeline(subparsers, common)
    return parser


def _register_simulate(subparsers, common) -> None:
    parser = subparsers.add_parser("simulate", parents=[common], help="Generate synthetic session logs")
    parser.add_argument("--households", type=int, default=50, help="Number of households (default 50)")
    parser.add_argument("--months", default="2021-01,2021-02,2021-03", help="Comma-separated YYYY-MM list")
    parser.add_argument("--profile-counts", help="Comma-separated planted profile count per household")
    parser.set_defaults(handler=_handle_simulate)


def _register_features(subparsers, common) -> None:
    parser = subparsers.add_parser("features", parents=[common], help="Extract the 17 features per unit")
    _add_feature_options(parser)
    parser.add_argument("--show-unit", help="Print one unit as a table: HOUSEHOLD:MONTH:UNIT")
    parser.set_defaults(handler=_handle_features)


def _register_reduce(subparsers, common) -> None:
    parser = subparsers.add_parser("reduce", parents=[common], help="Fit the pooled factor model")
    parser.add_argument("--n-factors", type=int, help="Number of factors (default: eigenvalue > 1 rule)")
    parser.set_defaults(handler=_handle_reduce)


def _register_estimate(subparsers, common) -> None:
    parser = subparsers.add_parser("estimate", parents=[common], help="Model-averaged profile counts")
    _add_estimate_options(parser)
    parser.set_defaults(handler=_handle_estimate)


def _register_uncertainty(subparsers, common) -> None:
    parser = subparsers.add_parser("uncertainty", parents=[common], help="Random-walk posterior over months")
    parser.add_argument("--input-space", choices=["raw", "factor", "both"], help="Which estimates to model")
    _add_mcmc_options(parser)
    parser.set_defaults(handler=_handle_uncertainty)


def _register_pipeline(subparsers, common) -> None:
    parser = subparsers.add_parser("pipeline", parents=[common], help="Run every stage")
    _add_feature_options(parser)
    _add_estimate_options(parser)
    parser.add_argument("--n-factors", type=int, help="Number of factors (default: eigenvalue > 1 rule)")
    _add_mcmc_options(parser)
    parser.set_defaults(handler=_handle_pipeline)


# ---------------------------------------------------------------------------
# Config assembly
# ---------------------------------------------------------------------------


def _split(value: Optional[str]) -> Optional[List[str]]:
    if value is None:
        return None
    return [item.strip() for item in value.split(",") if item.strip()]


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    def get(name: str) -> Any:
        return getattr(args, name, None)

    inputs = get("inputs")
    standardize = False if get("no_standardize") else None
    return {
        "seed": get("seed"),
        "out_dir": get("out"),
        "log_level": get("log_level"),
        "n_jobs": get("n_jobs"),
        "inputs": inputs or None,
        "aggregation": get("aggregation"),
        "input_space": get("input_space"),
        "standardize": standardize,
        "write_draws": get("write_draws"),
        "efa": {"n_factors": get("n_factors")},
        "grid": {"g_max": get("g_max"), "structures": _split(get("structures")), "n_init": get("n_init")},
        "mcmc": {
            "burn_in": get("burn_in"),
            "n_keep": get("n_keep"),
            "thin": get("thin"),
            "n_chains": get("chains"),
        },
    }


def _build_config(args: argparse.Namespace) -> RunConfig:
    try:
        return load_config(args.config, _overrides(args))
    except FileNotFoundError as e:
        raise CommandError("MISSING_CONFIG", str(e), exit_code=EXIT_USAGE) from e
    except (ValidationError, ValueError) as e:
        raise CommandError("INVALID_CONFIG", str(e), hint="Check flag values and the config file.", exit_code=EXIT_USAGE) from e


def _check_inputs(config: RunConfig) -> None:
    if not config.inputs:
        raise CommandError("MISSING_INPUT", "No session-log file given.", hint="Pass one or more CSV paths.", exit_code=EXIT_USAGE)
    for path in config.inputs:
        if not Path(path).exists():
            raise CommandError("MISSING_INPUT", f"Input not found: {path}", exit_code=EXIT_USAGE)


# ---------------------------------------------------------------------------
# Handlers
# ---------------------------------------------------------------------------


def _handle_simulate(args: argparse.Namespace, config: RunConfig) -> dict:
    counts = _split(args.profile_counts)
    try:
        profile_counts = [int(c) for c in counts] if counts else None
        return pipeline.run_simulate(config, args.households, _split(args.months) or [], profile_counts)
    except ValueError as e:
        raise CommandError("INVALID_SIMULATION", str(e), exit_code=EXIT_USAGE) from e


def _show_unit(config: RunConfig, spec: str) -> None:
    try:
        household_id, month, unit = spec.rsplit(":", 2)
        unit_index = int(unit)
    except ValueError as e:
        raise CommandError("INVALID_UNIT", f"Bad unit '{spec}'", hint="Use HOUSEHOLD:YYYY-MM:UNIT", exit_code=EXIT_USAGE) from e
    frame = pd.read_csv(Path(config.out_dir) / pipeline.FEATURES_FILE, dtype={"household_id": str, "month": str})
    rows = frame[(frame["household_id"] == household_id) & (frame["month"] == month) & (frame["unit"] == unit_index)]
    if rows.empty:
        raise CommandError("UNKNOWN_UNIT", f"No unit {spec} in the feature table.", exit_code=EXIT_USAGE)
    table = feature_table(rows.iloc[0][list(FEATURE_NAMES)].to_numpy(dtype=float))
    print(table.to_string(index=False))


def _handle_features(args: argparse.Namespace, config: RunConfig) -> dict:
    _check_inputs(config)
    result = pipeline.run_features(config)
    if args.show_unit:
        _show_unit(config, args.show_unit)
    return result


def _handle_reduce(args: argparse.Namespace, config: RunConfig) -> dict:
    return pipeline.run_reduce(config)


def _handle_estimate(args: argparse.Namespace, config: RunConfig) -> dict:
    return pipeline.run_estimate(config)


def _handle_uncertainty(args: argparse.Namespace, config: RunConfig) -> dict:
    return pipeline.run_uncertainty(config)


def _handle_pipeline(args: argparse.Namespace, config: RunConfig) -> dict:
    _check_inputs(config)
    return pipeline.run_pipeline(config)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _report(error: CommandError) -> None:
    print(f"error [{error.code}]: {error.message}", file=sys.stderr)
    if error.hint:
        print(f"hint: {error.hint}", file=sys.stderr)


def _run(handler: Callable, args: argparse.Namespace, config: RunConfig) -> dict:
    try:
        return handler(args, config)
    except CommandError:
        raise
    except FileNotFoundError as e:
        raise CommandError("MISSING_INPUT", str(e), exit_code=EXIT_USAGE) from e
    except InitializationError as e:
        raise CommandError("MCMC_INIT", f"{e} {e.diagnostic}") from e
    except (ValueError, RuntimeError) as e:
        raise CommandError("FATAL", str(e)) from e


def main(argv: Optional[Sequence[str]] = None) -> int:
    """CLI entry point; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if getattr(args, "handler", None) is None:
        parser.print_help()
        return EXIT_USAGE

    try:
        config = _build_config(args)
        logging.basicConfig(
            level=config.log_level,
            format="%(asctime)s %(levelname)s %(name)s: %(message)s",
            stream=sys.stderr,
        )
        result = _run(args.handler, args, config)
    except CommandError as e:
        logger.error(f"{args.command} failed: {e.message}")
        _report(e)
        return e.exit_code

    print(json.dumps(result, indent=2, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
