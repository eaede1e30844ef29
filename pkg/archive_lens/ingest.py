"""Parsers for archive manifests, detection exports, feature, label and prediction files.

Every parser collects row-level problems as ``RowError`` records instead of
dropping rows silently. In strict mode any row error raises ``IngestError``.
"""

import json
import logging
import math
import os
from collections import Counter, defaultdict
from datetime import date, datetime
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from archive_lens.config import BOX_OVERFLOW_TOLERANCE
from archive_lens.detectors import BaseDetector, build_detector_registry
from archive_lens.errors import IngestError, InvalidInputError
from archive_lens.models import BoundingBox, Detection, FeatureVector, FusedDetection, PhotoRecord
from archive_lens.utils import natural_key, normalize_photographer_id, read_csv_rows

logger = logging.getLogger(__name__)

MANIFEST_COLUMNS = ("photo_id", "photographer", "date", "image_path", "width", "height")
DATE_FORMATS = ("%Y-%m-%d", "%d %b %Y", "%d %B %Y", "%d.%m.%Y")


class RowError(BaseModel):
    """A rejected input row."""

    source: str
    line: int
    photo_id: Optional[str] = None
    message: str

    def render(self) -> str:
        return f"{self.source}:{self.line}: {self.photo_id or '-'}: {self.message}"


class ManifestEntry(BaseModel):
    photo_id: str = Field(min_length=1)
    photographer_id: str = Field(min_length=1)
    capture_date: Optional[date] = None
    image_path: str = Field(min_length=1)
    width: int = Field(gt=0)
    height: int = Field(gt=0)


class ArchiveManifest(BaseModel):
    """Parsed archive metadata; ``errors`` lists rejected rows."""

    entries: List[ManifestEntry] = Field(default_factory=list)
    errors: List[RowError] = Field(default_factory=list)

    def by_id(self) -> Dict[str, ManifestEntry]:
        return {e.photo_id: e for e in self.entries}

    def to_photo_records(
        self, fused: Optional[Dict[str, List[FusedDetection]]] = None
    ) -> List[PhotoRecord]:
        """Photo records in photo_id order, with fused detections attached."""
        fused = fused or {}
        return [
            PhotoRecord(
                photo_id=e.photo_id,
                photographer_id=e.photographer_id,
                capture_date=e.capture_date,
                image_width=e.width,
                image_height=e.height,
                fused_detections=fused.get(e.photo_id, []),
            )
            for e in sorted(self.entries, key=lambda e: natural_key(e.photo_id))
        ]


class DetectionBatch(BaseModel):
    """Detections from one or more detector exports, keyed by photo_id."""

    detector_ids: List[str] = Field(default_factory=list)
    input_resolutions: Dict[str, Optional[str]] = Field(default_factory=dict)
    detections: Dict[str, List[Detection]] = Field(default_factory=dict)
    errors: List[RowError] = Field(default_factory=list)
    dropped_labels: int = 0

    def count(self) -> int:
        return sum(len(v) for v in self.detections.values())

    def merge(self, other: "DetectionBatch") -> "DetectionBatch":
        detections: Dict[str, List[Detection]] = defaultdict(list)
        for batch in (self, other):
            for photo_id, items in batch.detections.items():
                detections[photo_id].extend(items)
        return DetectionBatch(
            detector_ids=self.detector_ids + other.detector_ids,
            input_resolutions={**self.input_resolutions, **other.input_resolutions},
            detections=dict(detections),
            errors=self.errors + other.errors,
            dropped_labels=self.dropped_labels + other.dropped_labels,
        )


def _require_file(path: str) -> None:
    if not os.path.isfile(path):
        raise InvalidInputError(f"Input file not found: {path}")


def _raise_if_strict(strict: bool, errors: List[RowError], path: str) -> None:
    if strict and errors:
        raise IngestError(f"{len(errors)} invalid rows in {path}", errors)


def parse_date(text: Optional[str]) -> Optional[date]:
    """ISO-8601, "25 Jun 1941" or "25.6.1941"; blank means no date."""
    text = (text or "").strip()
    if not text:
        return None
    for fmt in DATE_FORMATS:
        try:
            return datetime.strptime(text, fmt).date()
        except ValueError:
            continue
    raise ValueError(f"unparseable date {text!r}")


def _positive_int(value: Any, name: str) -> int:
    try:
        number = int(str(value).strip())
    except ValueError:
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if number <= 0:
        raise ValueError(f"{name} must be positive, got {number}")
    return number


def parse_manifest(path: str, strict: bool = False) -> ArchiveManifest:
    """Parse the archive manifest CSV.

    Duplicate photo ids are a hard error. Rows with missing mandatory fields
    or malformed values land in ``ArchiveManifest.errors``.
    """
    _require_file(path)
    rows, header = read_csv_rows(path)
    missing = [c for c in MANIFEST_COLUMNS if c not in header]
    if header and missing:
        raise InvalidInputError(f"{path}: missing manifest columns {missing}")

    photo_ids = [(row.get("photo_id") or "").strip() for row in rows]
    duplicates = sorted((pid for pid, n in Counter(photo_ids).items() if pid and n > 1), key=natural_key)
    if duplicates:
        raise InvalidInputError(f"{path}: duplicate photo_id values: {', '.join(duplicates)}")

    entries, errors = [], []
    for row, photo_id in zip(rows, photo_ids):
        line = row["__line__"]
        try:
            blank = [c for c in ("photo_id", "photographer", "image_path", "width", "height")
                     if not (row.get(c) or "").strip()]
            if blank:
                raise ValueError(f"missing mandatory fields: {', '.join(blank)}")
            entries.append(ManifestEntry(
                photo_id=photo_id,
                photographer_id=normalize_photographer_id(row["photographer"]),
                capture_date=parse_date(row.get("date")),
                image_path=row["image_path"].strip(),
                width=_positive_int(row["width"], "width"),
                height=_positive_int(row["height"], "height"),
            ))
        except ValueError as e:
            errors.append(RowError(source=path, line=line, photo_id=photo_id or None, message=str(e)))

    for error in errors:
        logger.warning(f"Rejected manifest row {error.render()}")
    _raise_if_strict(strict, errors, path)
    logger.info(f"Parsed manifest {path}: {len(entries)} photos, {len(errors)} rejected rows")
    return ArchiveManifest(entries=entries, errors=errors)


def _number(value: Any, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"{name} must be a number, got {value!r}")
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite")
    return float(value)


def _parse_box(raw: Any, entry: ManifestEntry) -> BoundingBox:
    if not isinstance(raw, list) or len(raw) != 4:
        raise ValueError(f"box must be [x_min, y_min, x_max, y_max], got {raw!r}")
    x_min, y_min, x_max, y_max = (_number(c, "box coordinate") for c in raw)
    if x_min > x_max or y_min > y_max:
        raise ValueError(f"negative box extent {raw}")

    slack_x = BOX_OVERFLOW_TOLERANCE * entry.width
    slack_y = BOX_OVERFLOW_TOLERANCE * entry.height
    if (x_min < -slack_x or y_min < -slack_y
            or x_max > entry.width + slack_x or y_max > entry.height + slack_y):
        raise ValueError(f"box {raw} exceeds image {entry.width}x{entry.height} "
                         f"by more than {BOX_OVERFLOW_TOLERANCE:.0%}")
    box = BoundingBox(x_min=x_min, y_min=y_min, x_max=x_max, y_max=y_max)
    return box.clip(entry.width, entry.height)


def _parse_detector_block(
    block: Any,
    path: str,
    manifest_index: Dict[str, ManifestEntry],
    registry: Dict[str, BaseDetector],
) -> DetectionBatch:
    if not isinstance(block, dict) or not isinstance(block.get("detector_id"), str):
        raise InvalidInputError(f"{path}: each detector block needs a string 'detector_id'")
    detector_id = block["detector_id"]
    rows = block.get("detections")
    if not isinstance(rows, list):
        raise InvalidInputError(f"{path}: detector '{detector_id}' needs a 'detections' list")

    adapter = registry.get(detector_id)
    if adapter is None:
        logger.warning(f"No adapter registered for detector '{detector_id}'; labels used as given")
    source = f"{path}[{detector_id}]"
    resolution = block.get("input_resolution") or (adapter.resolution_note() if adapter else None)

    detections: Dict[str, List[Detection]] = defaultdict(list)
    errors, dropped = [], 0
    for line, row in enumerate(rows, start=1):
        photo_id = row.get("photo_id") if isinstance(row, dict) else None
        try:
            if not isinstance(row, dict):
                raise ValueError("detection row must be an object")
            if not isinstance(photo_id, str):
                raise ValueError(f"photo_id must be a string, got {photo_id!r}")
            if photo_id not in manifest_index:
                raise ValueError(f"unknown photo_id {photo_id!r}")
            raw_label = row.get("class")
            if not isinstance(raw_label, str) or not raw_label.strip():
                raise ValueError("missing class label")
            label = adapter.normalize_label(raw_label) if adapter else raw_label.strip().lower()
            if label is None:
                dropped += 1
                continue
            confidence = _number(row.get("confidence"), "confidence")
            if not 0.0 <= confidence <= 1.0:
                raise ValueError(f"confidence {confidence} outside [0, 1]")
            box = _parse_box(row.get("box"), manifest_index[photo_id])
            detections[photo_id].append(Detection(
                box=box, class_label=label, confidence=confidence, detector_id=detector_id,
            ))
        except ValueError as e:
            errors.append(RowError(source=source, line=line,
                                   photo_id=photo_id if isinstance(photo_id, str) else None,
                                   message=str(e)))

    return DetectionBatch(
        detector_ids=[detector_id],
        input_resolutions={detector_id: resolution},
        detections=dict(detections),
        errors=errors,
        dropped_labels=dropped,
    )


def parse_detections(
    path: str,
    manifest: ArchiveManifest,
    strict: bool = False,
    registry: Optional[Dict[str, BaseDetector]] = None,
) -> DetectionBatch:
    """Parse one detection export: a detector object or a list of them.

    Boxes must be in original-image pixels; overflow up to 2% of the image
    dimension is clipped, larger overflow rejects the row.
    """
    _require_file(path)
    with open(path, "r", encoding="utf-8") as f:
        try:
            payload = json.load(f)
        except json.JSONDecodeError as e:
            raise InvalidInputError(f"{path} is not valid JSON: {e}")

    registry = registry if registry is not None else build_detector_registry()
    blocks = payload if isinstance(payload, list) else [payload]
    index = manifest.by_id()

    batch = DetectionBatch()
    for block in blocks:
        batch = batch.merge(_parse_detector_block(block, path, index, registry))

    for error in batch.errors:
        logger.warning(f"Rejected detection row {error.render()}")
    _raise_if_strict(strict, batch.errors, path)
    logger.info(f"Parsed {batch.count()} detections from {path} "
                f"({', '.join(batch.detector_ids)}), {len(batch.errors)} rejected, "
                f"{batch.dropped_labels} background labels dropped")
    return batch


def parse_features(path: str, strict: bool = False) -> Tuple[List[FeatureVector], List[RowError]]:
    """Feature CSV: photo_id, photographer_id, then D numeric columns."""
    _require_file(path)
    rows, header = read_csv_rows(path)
    if header[:2] != ["photo_id", "photographer_id"] or len(header) < 3:
        raise InvalidInputError(
            f"{path}: header must be photo_id, photographer_id and at least one feature column"
        )
    columns = header[2:]

    features, errors = [], []
    for row in rows:
        photo_id = (row.get("photo_id") or "").strip()
        try:
            if not photo_id or not (row.get("photographer_id") or "").strip():
                raise ValueError("missing photo_id or photographer_id")
            values = [float(row[c]) for c in columns]
            features.append(FeatureVector(
                values=values,
                photo_id=photo_id,
                photographer_id=normalize_photographer_id(row["photographer_id"]),
            ))
        except (TypeError, ValueError) as e:
            message = str(e).splitlines()[0] if str(e) else "invalid feature row"
            errors.append(RowError(source=path, line=row["__line__"],
                                   photo_id=photo_id or None, message=message))

    _raise_if_strict(strict, errors, path)
    logger.info(f"Parsed {len(features)} feature vectors of dimension {len(columns)} from {path}")
    return features, errors


def parse_labels(path: str, strict: bool = False) -> Tuple[List[str], List[RowError]]:
    """Label CSV with a ``label`` column (one row per training sample)."""
    _require_file(path)
    rows, header = read_csv_rows(path)
    if "label" not in header:
        raise InvalidInputError(f"{path}: missing 'label' column")

    labels, errors = [], []
    for row in rows:
        label = (row.get("label") or "").strip()
        if label:
            labels.append(label)
        else:
            errors.append(RowError(source=path, line=row["__line__"],
                                   photo_id=(row.get("photo_id") or None), message="empty label"))
    _raise_if_strict(strict, errors, path)
    return labels, errors


def parse_probabilities(
    path: str, strict: bool = False
) -> Tuple[List[str], np.ndarray, np.ndarray, List[RowError]]:
    """Prediction CSV: photo_id, true_label, then one probability column per class.

    Returns the class labels (header order), an N x C probability array, the
    true class indices and the rejected rows.
    """
    _require_file(path)
    rows, header = read_csv_rows(path)
    if header[:2] != ["photo_id", "true_label"] or len(header) < 3:
        raise InvalidInputError(
            f"{path}: header must be photo_id, true_label and one column per class"
        )
    classes = header[2:]
    index = {label: i for i, label in enumerate(classes)}

    probs, truth, errors = [], [], []
    for row in rows:
        photo_id = (row.get("photo_id") or "").strip() or None
        try:
            true_label = (row.get("true_label") or "").strip()
            if true_label not in index:
                raise ValueError(f"unknown true_label {true_label!r}")
            values = [float(row[c]) for c in classes]
            if any(not math.isfinite(v) or v < 0 for v in values):
                raise ValueError("probabilities must be finite and non-negative")
            if abs(math.fsum(values) - 1.0) > 1e-6:
                raise ValueError("probabilities do not sum to 1")
            probs.append(values)
            truth.append(index[true_label])
        except (TypeError, ValueError) as e:
            errors.append(RowError(source=path, line=row["__line__"], photo_id=photo_id, message=str(e)))

    _raise_if_strict(strict, errors, path)
    return (
        classes,
        np.asarray(probs, dtype=np.float64).reshape(len(probs), len(classes)),
        np.asarray(truth, dtype=np.int64),
        errors,
    )


def report_row_errors(errors: Sequence[RowError]) -> str:
    """Row error report, one line per rejected row."""
    return "".join(f"{e.render()}\n" for e in errors)
