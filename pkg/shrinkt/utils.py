"""
shrinkt Utilities: I/O, Logging and Environment Settings

Helpers shared by the command line and the benchmark scripts: reading and
writing summary tables, JSON reports, logging setup and environment-driven
settings.
"""

import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from .exceptions import ConfigError, DataError
from .models import SummaryStats

SUMMARY_COLUMNS = ["beta_hat", "se_hat", "df"]
LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


def configure_logging(verbose: bool = False, stream=None) -> logging.Logger:
    """
    Attach a single stderr handler to the ``shrinkt`` logger.

    ``verbose`` selects INFO, otherwise WARNING.
    """
    logger = logging.getLogger("shrinkt")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    handler = logging.StreamHandler(stream or sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.addHandler(handler)
    logger.setLevel(logging.INFO if verbose else logging.WARNING)
    logger.propagate = False
    return logger


def default_workers() -> int:
    return max(1, min(4, os.cpu_count() or 1))


def env_settings() -> Dict[str, Any]:
    """Settings taken from the environment (``SHRINKT_WORKERS``)."""
    raw = os.getenv("SHRINKT_WORKERS")
    if raw is None or raw.strip() == "":
        return {"workers": default_workers()}
    try:
        workers = int(raw)
    except ValueError:
        raise ConfigError(f"SHRINKT_WORKERS must be an integer, got {raw!r}") from None
    if workers < 1:
        raise ConfigError("SHRINKT_WORKERS must be at least 1")
    return {"workers": workers}


def _parse_cell(text: str, path, line: int, column: str) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise DataError(f"{path}: line {line}, column {column!r}: "
                        f"cannot parse {text!r} as a number") from None
    return value


def read_summary_csv(path) -> SummaryStats:
    """
    Read a headered CSV with columns beta_hat, se_hat, df (and optional id).

    Raises:
        DataError: unreadable or malformed file, missing columns, or a
            non-finite / out-of-range cell (message names line and column).
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError:
        raise DataError(f"input file not found: {path}") from None
    except pd.errors.EmptyDataError:
        raise DataError(f"{path}: file is empty") from None
    except pd.errors.ParserError as e:
        raise DataError(f"{path}: malformed CSV ({e})") from None

    missing = [c for c in SUMMARY_COLUMNS if c not in frame.columns]
    if missing:
        raise DataError(f"{path}: missing required columns {missing} (header line 1)")
    if frame.empty:
        raise DataError(f"{path}: no data rows")

    parsed: Dict[str, List[float]] = {c: [] for c in SUMMARY_COLUMNS}
    for row, record in enumerate(frame[SUMMARY_COLUMNS].itertuples(index=False), start=2):
        beta, se, df = (_parse_cell(text.strip(), path, row, col)
                        for text, col in zip(record, SUMMARY_COLUMNS))
        if not math.isfinite(beta):
            raise DataError(f"{path}: line {row}, column 'beta_hat': non-finite value {beta!r}")
        if not math.isfinite(se) or se < 0:
            raise DataError(f"{path}: line {row}, column 'se_hat': "
                            f"expected a finite nonnegative value, got {se!r}")
        if math.isnan(df) or df <= 0:
            raise DataError(f"{path}: line {row}, column 'df': "
                            f"expected a positive value or inf, got {df!r}")
        parsed["beta_hat"].append(beta)
        parsed["se_hat"].append(se)
        parsed["df"].append(df)

    ids = frame["id"].tolist() if "id" in frame.columns else None
    return SummaryStats(beta_hat=np.array(parsed["beta_hat"]), se=np.array(parsed["se_hat"]),
                        df=np.array(parsed["df"]), ids=ids)


def read_table(path) -> pd.DataFrame:
    """Read a CSV written by ``write_table`` without losing float precision."""
    try:
        return pd.read_csv(path, float_precision="round_trip")
    except FileNotFoundError:
        raise DataError(f"file not found: {path}") from None
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise DataError(f"{path}: malformed CSV ({e})") from None


def write_table(frame: pd.DataFrame, path) -> Path:
    """Write a CSV with shortest round-trip floats and ``\\n`` line endings."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def _json_default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def to_json(payload: Dict[str, Any]) -> str:
    return json.dumps(payload, indent=2, default=_json_default)


def write_json(payload: Dict[str, Any], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(to_json(payload))
        f.write("\n")
    return path


def read_json(path) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None


def ensure_dir(path: Optional[str]) -> Path:
    if path is None:
        raise ConfigError("an output directory is required")
    out = Path(path)
    if out.exists() and not out.is_dir():
        raise ConfigError(f"{out} exists and is not a directory")
    out.mkdir(parents=True, exist_ok=True)
    return out
