"""Configuration settings for the archive-lens toolkit."""

import json
import os
from typing import Any, Dict, Optional

from dotenv import load_dotenv

from archive_lens.errors import ConfigurationError

# Load environment variables
load_dotenv()

# Runtime settings
ARCHIVE_LENS_THREADS = os.getenv("ARCHIVE_LENS_THREADS")
ARCHIVE_LENS_LOG_LEVEL = os.getenv("ARCHIVE_LENS_LOG_LEVEL", "INFO")
ARCHIVE_LENS_CONFIG = os.getenv("ARCHIVE_LENS_CONFIG")

# Fusion settings (per-detector confidence thresholds live on the detector adapters)
DEFAULT_GROUPING_IOU = 0.1

# Framing settings
DEFAULT_CLOSEUP_MIN_FRACTION = 0.65
DEFAULT_OVERALL_MAX_FRACTION = 0.10
PERSON_LABEL = "person"

# Content statistics: the eleven analysed classes, in report column order
DEFAULT_CLASSES = (
    "person", "airplane", "boat", "train", "car", "bicycle",
    "skis", "dog", "horse", "chair", "tie",
)

# Split settings
DEFAULT_SPLIT_FRACTIONS = (0.6, 0.2, 0.2)
DEFAULT_SEED = 0

# Similarity settings
DEFAULT_SIGNATURE_CAP = 256

# Ingest settings
BOX_OVERFLOW_TOLERANCE = 0.02


def worker_count() -> int:
    """Number of workers for parallel stages, capped by ARCHIVE_LENS_THREADS."""
    available = os.cpu_count() or 1
    if not ARCHIVE_LENS_THREADS:
        return available
    try:
        cap = int(ARCHIVE_LENS_THREADS)
    except ValueError:
        raise ConfigurationError(
            f"ARCHIVE_LENS_THREADS must be an integer, got {ARCHIVE_LENS_THREADS!r}"
        )
    if cap < 1:
        raise ConfigurationError("ARCHIVE_LENS_THREADS must be at least 1")
    return min(cap, available)


def load_config_file(path: Optional[str] = None) -> Dict[str, Any]:
    """Read the shared JSON config file; an absent path yields an empty config."""
    path = path or ARCHIVE_LENS_CONFIG
    if not path:
        return {}
    if not os.path.exists(path):
        raise ConfigurationError(f"Config file not found: {path}")

    with open(path, "r", encoding="utf-8") as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Config file {path} is not valid JSON: {e}")

    if not isinstance(raw, dict):
        raise ConfigurationError(f"Config file {path} must hold a JSON object")
    return raw


def validate_config(config: Any) -> None:
    """Check constraints spanning several fields of a parsed pipeline config.

    Unknown sections and keys are rejected earlier by the config models.
    """
    fractions = config.split.fractions
    if any(f <= 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigurationError(
            f"split fractions must be positive and sum to 1, got {list(fractions)}"
        )

    duplicates = sorted({c for c in config.classes if config.classes.count(c) > 1})
    if duplicates:
        raise ConfigurationError(f"Config 'classes' lists labels twice: {', '.join(duplicates)}")
