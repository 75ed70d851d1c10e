"""
Loading and overriding experiment configurations.

Configs are JSON documents with a top-level ``schema_version``; the rest is
validated against ExperimentConfig.
"""
import json
import logging
import os
from pathlib import Path
from typing import Optional, Union
from dotenv import load_dotenv
from pydantic import ValidationError
from app.errors import ConfigError
from app.models.schemas import ExperimentConfig
from app.utils.paths import experiments_path, results_path

load_dotenv()

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DEFAULT_CONFIG = experiments_path("paper_sec5.json")


def _field_names(error: ValidationError) -> list[str]:
    return [".".join(str(part) for part in e["loc"]) or "<root>" for e in error.errors()]


def validate_config(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("experiment config must be a JSON object")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"unsupported schema_version {version!r}, expected {SCHEMA_VERSION}", ["schema_version"]
        )
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError("invalid experiment config", _field_names(e)) from e


def default_config_path() -> Path:
    return Path(os.getenv("BALANCER_CONFIG", str(DEFAULT_CONFIG)))


def load_experiment_config(path: Optional[Union[str, Path]] = None) -> ExperimentConfig:
    path = Path(path) if path else default_config_path()
    if not path.exists() and not path.suffix:
        # allow "experiments/paper_sec5" without the extension
        path = path.with_suffix(".json")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e
    cfg = validate_config(data)
    logger.info("Loaded config %s from %s", cfg.name, path)
    return cfg


def apply_overrides(
    cfg: ExperimentConfig,
    out: Optional[str] = None,
    seed: Optional[int] = None,
    duration: Optional[float] = None,
) -> ExperimentConfig:
    """Return a re-validated copy with command-line overrides applied."""
    data = cfg.model_dump()
    if out is not None:
        data["output_path"] = str(Path(out).resolve())
    if seed is not None:
        data["plant"]["rng_seed"] = seed
    if duration is not None:
        data["duration"] = duration
    return validate_config(data)


def resolve_output_path(cfg: ExperimentConfig) -> Path:
    """Relative output paths land under the results directory."""
    path = Path(cfg.output_path) if cfg.output_path else Path(f"{cfg.name}.csv")
    return path if path.is_absolute() else results_path(path)
