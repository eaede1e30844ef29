"""Utility functions for the archive-lens toolkit."""

import csv
import io
import logging
import math
import re
from typing import Any, Dict, Iterable, List, Sequence, Tuple

from archive_lens.config import ARCHIVE_LENS_LOG_LEVEL

# Configure logging
logging.basicConfig(
    level=getattr(logging, ARCHIVE_LENS_LOG_LEVEL.upper(), logging.INFO),
    format='%(asctime)s - %(levelname)s - %(message)s',
)
logger = logging.getLogger(__name__)

_DIGITS = re.compile(r"(\d+)")


def normalize_photographer_id(name: str) -> str:
    """Normalize a photographer name or id for consistent grouping."""
    if not name:
        return ""
    return " ".join(name.strip().split())


def natural_key(value: str) -> tuple:
    """Sort key that orders embedded integers numerically ("2" before "10")."""
    return tuple(
        (0, int(part), "") if part.isdigit() else (1, 0, part)
        for part in _DIGITS.split(value) if part
    )


def format_number(value: Any) -> str:
    """Render a number with 9 significant digits, '.' decimal separator."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    value = float(value)
    if math.isnan(value):
        return "nan"
    if value == 0:
        return "0"
    return format(value, ".9g")


def render_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """Render rows as CSV text with LF line endings and formatted numbers."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([
            format_number(cell) if isinstance(cell, (int, float)) or cell is None else cell
            for cell in row
        ])
    return buffer.getvalue()


def read_csv_rows(path: str) -> Tuple[List[Dict[str, Any]], List[str]]:
    """Read a UTF-8 CSV file into dictionaries, tagging each with its line number."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        rows = []
        for row in reader:
            row["__line__"] = reader.line_num
            rows.append(row)
        return rows, list(reader.fieldnames or [])
