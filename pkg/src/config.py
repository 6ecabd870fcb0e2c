"""
config.py
---------
Run configuration for the profiling pipeline.

Precedence (lowest first): built-in defaults, environment variables (a
``.env`` file is honoured), the JSON config file, explicit CLI flags.

Environment variables
---------------------
PROFILES_SEED       master seed (default 42)
PROFILES_OUT_DIR    output directory (default ./out)
PROFILES_N_JOBS     worker processes (default 1)
PROFILES_LOG_LEVEL  logging level (default INFO)
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from dotenv import load_dotenv
from pydantic import BaseModel, Field, field_validator, model_validator

from src.features.units import parse_aggregation
from src.gmm.structures import STRUCTURES

load_dotenv()
logger = logging.getLogger(__name__)

MAX_COMPONENTS = 15


def _env_int(name: str, default: int) -> int:
    value = os.getenv(name)
    if value is None or value.strip() == "":
        return default
    try:
        return int(value)
    except ValueError as e:
        raise ValueError(f"{name} must be an integer, got '{value}'") from e


class EfaSettings(BaseModel):
    n_factors: Optional[int] = Field(default=None, ge=1, description="None = Kaiser rule")
    max_iter: int = Field(default=200, gt=0)
    tol: float = Field(default=1e-6, gt=0)


class GridSettings(BaseModel):
    g_min: int = Field(default=1, ge=1, le=MAX_COMPONENTS)
    g_max: int = Field(default=MAX_COMPONENTS, ge=1, le=MAX_COMPONENTS)
    structures: List[str] = Field(default_factory=lambda: list(STRUCTURES))
    n_init: int = Field(default=5, gt=0)
    max_iter: int = Field(default=500, gt=0)
    tol: float = Field(default=1e-8, gt=0)
    reg_floor: float = Field(default=1e-8, gt=0)

    @field_validator("structures")
    @classmethod
    def _known_structures(cls, value: List[str]) -> List[str]:
        unknown = [s for s in value if s not in STRUCTURES]
        if unknown:
            raise ValueError(f"unknown covariance structure(s): {unknown}")
        if not value:
            raise ValueError("at least one covariance structure is required")
        # keep the canonical row order of the BIC matrix
        return [s for s in STRUCTURES if s in value]

    @model_validator(mode="after")
    def _ordered_bounds(self) -> "GridSettings":
        if self.g_min > self.g_max:
            raise ValueError("g_min must not exceed g_max")
        return self


class McmcSchedule(BaseModel):
    burn_in: int = Field(default=10_000, gt=0)
    n_keep: int = Field(default=20_000, gt=0)
    thin: int = Field(default=15, gt=0)
    n_chains: int = Field(default=4, ge=2)
    adapt_batch: int = Field(default=50, gt=0)
    target_accept: float = Field(default=0.44, gt=0, lt=1)

    @property
    def draws_per_chain(self) -> int:
        return self.n_keep // self.thin

    @model_validator(mode="after")
    def _keeps_draws(self) -> "McmcSchedule":
        if self.draws_per_chain < 1:
            raise ValueError("n_keep / thin must leave at least one stored draw")
        return self


class RunConfig(BaseModel):
    inputs: List[str] = Field(default_factory=list)
    aggregation: str = "day"
    standardize: bool = True
    input_space: Literal["raw", "factor", "both"] = "raw"
    efa: EfaSettings = Field(default_factory=EfaSettings)
    grid: GridSettings = Field(default_factory=GridSettings)
    mcmc: McmcSchedule = Field(default_factory=McmcSchedule)
    seed: int = Field(default_factory=lambda: _env_int("PROFILES_SEED", 42), ge=0)
    out_dir: str = Field(default_factory=lambda: os.getenv("PROFILES_OUT_DIR", "out"))
    n_jobs: int = Field(default_factory=lambda: _env_int("PROFILES_N_JOBS", 1), ge=1)
    log_level: str = Field(default_factory=lambda: os.getenv("PROFILES_LOG_LEVEL", "INFO"))
    write_draws: bool = False

    @field_validator("aggregation")
    @classmethod
    def _valid_aggregation(cls, value: str) -> str:
        parse_aggregation(value)
        return value.strip()

    @field_validator("log_level")
    @classmethod
    def _valid_level(cls, value: str) -> str:
        level = value.upper()
        if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"unknown log level '{value}'")
        return level


def load_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> RunConfig:
    """
    Build a RunConfig from an optional JSON file plus explicit overrides.

    Args:
        path:      JSON file with any subset of RunConfig keys (nested
                   sections as objects).
        overrides: Values that win over the file; ``None`` entries are ignored.

    Raises:
        FileNotFoundError: the config file does not exist.
        ValueError:        malformed JSON or invalid values.
    """
    payload: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Config file not found: {path}")
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ValueError(f"config file {path} is not valid JSON: {e}") from e
        if not isinstance(payload, dict):
            raise ValueError(f"config file {path} must hold a JSON object")

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if isinstance(value, dict):
            section = dict(payload.get(key) or {})
            section.update({k: v for k, v in value.items() if v is not None})
            payload[key] = section
        else:
            payload[key] = value

    config = RunConfig.model_validate(payload)
    logger.debug(f"Loaded config: {config.model_dump()}")
    return config
