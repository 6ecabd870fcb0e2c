"""
pipeline.py
-----------
End-to-end household profiling pipeline.

Chains: session logs → per-unit features → (optional) pooled factor
        analysis → per household-month model-averaged G_hat → Bayesian
        random-walk uncertainty over months

Every stage reads and writes plain files in one output directory, so running
the stages one by one produces exactly the files of a single ``run_pipeline``
call. Each stage also records itself in ``manifest.json``.
"""

import hashlib
import json
import logging
import zlib
from importlib import metadata
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence

import numpy as np
import pandas as pd

from src.averaging.estimate import (
    estimate_household_month,
    estimates_to_frame,
    read_estimates,
)
from src.averaging.reporting import compare_input_spaces, ecdf_data, scatter_data
from src.bayes_rw.sampler import run_mcmc
from src.bayes_rw.summary import (
    panel_from_estimates,
    plot_data,
    posterior_predictive,
    summarize,
    write_draws,
)
from src.config import RunConfig
from src.factor.efa import choose_n_factors, factor_scores, fit_efa, loadings_table, save_efa
from src.features.matrix import (
    FEATURE_LAYOUT,
    FEATURE_NAMES,
    KEY_COLUMNS,
    build_feature_matrix,
    frame_to_matrices,
    matrices_to_frame,
)
from src.ingest.sessions import group_by_household_month, read_session_files, write_rejections
from src.synth.sessions import default_household_specs, gen_sessions, write_ground_truth

logger = logging.getLogger(__name__)

FEATURES_FILE = "features.csv"
SCORES_FILE = "scores.csv"
EFA_FILE = "efa_model.json"
LOADINGS_FILE = "loadings.csv"
FAILURES_FILE = "failures.csv"
MANIFEST_FILE = "manifest.json"
FAILURE_COLUMNS = ("household_id", "month", "stage", "reason")

_VERSIONED_PACKAGES = ("numpy", "scipy", "pandas", "scikit-learn", "factor_analyzer", "arviz", "pydantic")


# ---------------------------------------------------------------------------
# Bookkeeping helpers
# ---------------------------------------------------------------------------


def file_digest(path: Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for chunk in iter(lambda: handle.read(8192), b""):
            digest.update(chunk)
    return digest.hexdigest()


def unit_seed(master: int, household_id: str, month: str) -> int:
    """Seed of one household-month, independent of processing order."""
    key = zlib.crc32(f"{household_id}|{month}".encode("utf-8"))
    return int(np.random.SeedSequence([master, key]).generate_state(1)[0])


def estimates_file(space: str) -> str:
    return f"estimates_{space}.csv"


def _package_versions() -> Dict[str, str]:
    versions = {}
    for name in _VERSIONED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "not installed"
    return versions


def write_manifest(
    config: RunConfig,
    stage: str,
    inputs: Iterable[Path],
    seeds: Optional[dict] = None,
    extra: Optional[dict] = None,
) -> Path:
    """
    Record a stage in ``manifest.json`` (config, seeds, versions, input
    digests). Entries of other stages are kept.
    """
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / MANIFEST_FILE
    manifest = json.loads(path.read_text(encoding="utf-8")) if path.exists() else {}

    manifest["config"] = config.model_dump(mode="json", exclude={"inputs", "out_dir", "log_level", "n_jobs"})
    manifest["master_seed"] = config.seed
    manifest["versions"] = _package_versions()
    stages = manifest.setdefault("stages", {})
    stages[stage] = {
        "inputs": {Path(p).name: file_digest(Path(p)) for p in inputs},
        "seeds": seeds or {},
        **(extra or {}),
    }
    manifest["stages"] = dict(sorted(stages.items()))
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def record_failures(out_dir: Path, stage: str, rows: Sequence[tuple]) -> Path:
    """Replace this stage's rows in ``failures.csv``, keeping the other stages'."""
    path = Path(out_dir) / FAILURES_FILE
    if path.exists():
        existing = pd.read_csv(path, dtype=str, keep_default_na=False)
        existing = existing[existing["stage"] != stage]
    else:
        existing = pd.DataFrame(columns=list(FAILURE_COLUMNS))
    new = pd.DataFrame(list(rows), columns=list(FAILURE_COLUMNS))
    table = pd.concat([existing, new], ignore_index=True)
    table = table.sort_values(["stage", "household_id", "month"], kind="stable")
    table.to_csv(path, index=False, lineterminator="\n")
    if rows:
        logger.warning(f"{stage}: {len(rows)} household-month(s) failed (see {path.name}).")
    return path


def _require(path: Path, produced_by: str) -> Path:
    if not path.exists():
        raise FileNotFoundError(f"{path} not found; run the '{produced_by}' stage first.")
    return path


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def run_simulate(
    config: RunConfig,
    n_households: int,
    months: Sequence[str],
    profile_counts: Optional[Sequence[int]] = None,
) -> dict:
    """Write synthetic ``sessions.csv`` and ``ground_truth.csv``."""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    specs = default_household_specs(n_households, months, seed=config.seed, profile_counts=profile_counts)
    text, truth = gen_sessions(specs, seed=config.seed)

    sessions_path = out_dir / "sessions.csv"
    sessions_path.write_text(text, encoding="utf-8")
    truth_path = write_ground_truth(truth, out_dir / "ground_truth.csv")
    logger.info(f"Simulated {n_households} household(s) x {len(months)} month(s) into {out_dir}")
    return {"sessions": str(sessions_path), "ground_truth": str(truth_path), "household_months": len(truth)}


def run_features(config: RunConfig) -> dict:
    """Step 1 – parse session logs and build the per-unit feature table."""
    if not config.inputs:
        raise ValueError("no input session files given")
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs = [Path(p) for p in config.inputs]

    logger.info("Step 1/4 – Extracting features …")
    parsed = read_session_files(inputs, n_jobs=config.n_jobs)
    write_rejections(parsed.rejections, out_dir / "rejections.csv")

    matrices = []
    failures = []
    for hm in group_by_household_month(parsed.records):
        try:
            matrices.append(build_feature_matrix(hm, config.aggregation))
        except ValueError as e:
            failures.append((hm.household_id, hm.month, "features", str(e)))

    frame = matrices_to_frame(matrices)
    features_path = out_dir / FEATURES_FILE
    frame.to_csv(features_path, index=False, lineterminator="\n")
    record_failures(out_dir, "features", failures)
    write_manifest(
        config,
        "features",
        inputs,
        extra={"rejections": len(parsed.rejections), "household_months": len(matrices)},
    )
    logger.info(
        f"Features: {len(parsed.records)} session(s), {len(matrices)} household-month(s), "
        f"{len(frame)} unit(s); {len(parsed.rejections)} row(s) rejected."
    )
    return {
        "features": str(features_path),
        "sessions": len(parsed.records),
        "rejections": len(parsed.rejections),
        "household_months": len(matrices),
        "units": len(frame),
        "failures": len(failures),
    }


def run_reduce(config: RunConfig) -> dict:
    """Step 2 – pooled factor analysis of the feature table and factor scores."""
    out_dir = Path(config.out_dir)
    features_path = _require(out_dir / FEATURES_FILE, "features")
    frame = pd.read_csv(features_path, dtype={"household_id": str, "month": str})

    logger.info("Step 2/4 – Fitting the factor model …")
    x = frame[list(FEATURE_NAMES)].to_numpy(dtype=float)
    varying = np.ptp(x, axis=0) > 0
    names = [n for n, keep in zip(FEATURE_NAMES, varying) if keep]
    if len(names) < len(FEATURE_NAMES):
        logger.warning(f"Dropping {len(FEATURE_NAMES) - len(names)} constant feature(s) before EFA.")
    x = x[:, varying]

    if config.efa.n_factors is None:
        k = choose_n_factors(np.corrcoef(x, rowvar=False)).n_factors
    else:
        k = config.efa.n_factors
    model = fit_efa(x, k, max_iter=config.efa.max_iter, tol=config.efa.tol, feature_names=names)

    save_efa(model, out_dir / EFA_FILE)
    sources = {name: source for name, source, _ in FEATURE_LAYOUT}
    loadings_table(model, sources=[sources[n] for n in names]).to_csv(
        out_dir / LOADINGS_FILE, index=False, lineterminator="\n"
    )

    scores = factor_scores(model, x)
    score_cols = [f"factor_{f + 1}" for f in range(k)]
    scores_frame = pd.concat(
        [frame[list(KEY_COLUMNS)].reset_index(drop=True), pd.DataFrame(scores, columns=score_cols)],
        axis=1,
    )
    scores_frame.to_csv(out_dir / SCORES_FILE, index=False, lineterminator="\n")

    write_manifest(
        config,
        "reduce",
        [features_path],
        extra={"n_factors": k, "explained_variance_fraction": model.explained_variance_fraction},
    )
    return {"n_factors": k, "explained_variance_fraction": model.explained_variance_fraction}


def _estimate_space(config: RunConfig, space: str) -> pd.DataFrame:
    out_dir = Path(config.out_dir)
    if space == "raw":
        source = _require(out_dir / FEATURES_FILE, "features")
        frame = pd.read_csv(source, dtype={"household_id": str, "month": str})
        columns = list(FEATURE_NAMES)
    else:
        source = _require(out_dir / SCORES_FILE, "reduce")
        frame = pd.read_csv(source, dtype={"household_id": str, "month": str})
        columns = [c for c in frame.columns if c.startswith("factor_")]

    estimates = []
    failures = []
    for matrix in frame_to_matrices(frame, columns=columns):
        seed = unit_seed(config.seed, matrix.household_id, matrix.month)
        try:
            estimates.append(
                estimate_household_month(
                    matrix.values,
                    household_id=matrix.household_id,
                    month=matrix.month,
                    settings=config.grid,
                    seed=seed,
                    standardize_columns=config.standardize,
                    n_jobs=config.n_jobs,
                )
            )
        except ValueError as e:
            failures.append((matrix.household_id, matrix.month, f"estimate:{space}", str(e)))

    table = estimates_to_frame(estimates)
    table.to_csv(out_dir / estimates_file(space), index=False, lineterminator="\n")
    record_failures(out_dir, f"estimate:{space}", failures)
    write_manifest(
        config,
        f"estimate:{space}",
        [source],
        seeds={"household_month": "SeedSequence([master_seed, crc32('household_id|month')])"},
        extra={"estimates": len(table), "failures": len(failures)},
    )
    logger.info(f"Estimated {len(table)} household-month(s) on {space} input; mean G_hat={table['g_hat'].mean():.3f}")
    return table


def run_estimate(config: RunConfig) -> dict:
    """Step 3 – model-averaged profile counts for every household-month."""
    logger.info("Step 3/4 – Estimating profile counts …")
    out_dir = Path(config.out_dir)
    spaces = ["raw", "factor"] if config.input_space == "both" else [config.input_space]
    tables = {space: _estimate_space(config, space) for space in spaces}

    result = {space: str(out_dir / estimates_file(space)) for space in spaces}
    if len(tables) > 1:
        compare_input_spaces(tables).to_csv(out_dir / "comparison.csv", index=False, lineterminator="\n")
        scatter_data(tables).to_csv(out_dir / "scatter.csv", index=False, lineterminator="\n")
        ecdf_data(tables).to_csv(out_dir / "ecdf.csv", index=False, lineterminator="\n")
        result["comparison"] = str(out_dir / "comparison.csv")
    return result


def run_uncertainty(config: RunConfig) -> dict:
    """Step 4 – random-walk posterior over each household's monthly G_hat."""
    out_dir = Path(config.out_dir)
    space = "factor" if config.input_space == "factor" else "raw"
    source = _require(out_dir / estimates_file(space), "estimate")

    logger.info("Step 4/4 – Sampling the random-walk model …")
    panel = panel_from_estimates(read_estimates(source))
    draws = run_mcmc(panel, config.mcmc, seed=config.seed, n_jobs=config.n_jobs)
    summary = summarize(draws)

    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1]))
    replicated = posterior_predictive(draws, rng)

    summary.cells.to_csv(out_dir / "posterior_summary.csv", index=False, lineterminator="\n")
    summary.diagnostics.to_csv(out_dir / "diagnostics.csv", index=False, lineterminator="\n")
    plot_data(panel, summary, replicated).to_csv(out_dir / "plot_data.csv", index=False, lineterminator="\n")
    if config.write_draws:
        write_draws(draws, out_dir / "draws.csv")

    write_manifest(
        config,
        "uncertainty",
        [source],
        seeds={"chains": draws.seeds, "posterior_predictive": "SeedSequence([master_seed, 1])"},
        extra={"max_rhat": summary.max_rhat, "acceptance": draws.acceptance},
    )
    logger.info(f"Posterior summary written; max R-hat {summary.max_rhat:.3f}")
    return {
        "posterior_summary": str(out_dir / "posterior_summary.csv"),
        "diagnostics": str(out_dir / "diagnostics.csv"),
        "plot_data": str(out_dir / "plot_data.csv"),
        "max_rhat": summary.max_rhat,
    }


def run_pipeline(config: RunConfig) -> dict:
    """
    Full pipeline: session logs → estimates with uncertainty.

    Returns:
        dict with the per-stage results under "features", "reduce" (only
        when factor scores are used), "estimate" and "uncertainty".

    Raises:
        FileNotFoundError: an input file does not exist.
        ValueError:        invalid input or no usable household-month.
        RuntimeError:      factor extraction or MCMC initialization failed.
    """
    logger.info(f"=== Pipeline START: {len(config.inputs)} input file(s) → {config.out_dir} ===")
    result: Dict[str, dict] = {"features": run_features(config)}
    if config.input_space in ("factor", "both"):
        result["reduce"] = run_reduce(config)
    result["estimate"] = run_estimate(config)
    result["uncertainty"] = run_uncertainty(config)
    logger.info("=== Pipeline COMPLETE ===")
    return result
