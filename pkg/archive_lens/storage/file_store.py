"""File-backed store: fused.json and CSV report outputs."""

import json
import logging
import os
from typing import Any, Dict, List, Optional, Sequence

from archive_lens.errors import InvalidInputError
from archive_lens.models import BoundingBox, Detection, FusedDetection, PhotoRecord
from archive_lens.storage.memory_store import MemoryStore
from archive_lens.utils import render_csv

logger = logging.getLogger(__name__)

FUSED_FORMAT_VERSION = 1


def _detection_to_json(detection: Detection) -> Dict[str, Any]:
    return {
        "detector_id": detection.detector_id,
        "class": detection.class_label,
        "confidence": detection.confidence,
        "box": detection.box.as_list(),
    }


def _fused_to_json(fused: FusedDetection) -> Dict[str, Any]:
    return {
        "class": fused.class_label,
        "confidence": fused.confidence,
        "box": fused.box.as_list(),
        "source_detectors": list(fused.source_detectors),
        "members": [_detection_to_json(m) for m in fused.member_detections],
    }


def _fused_from_json(raw: Dict[str, Any]) -> FusedDetection:
    members = [
        Detection(
            box=BoundingBox.from_list(m["box"]),
            class_label=m["class"],
            confidence=m["confidence"],
            detector_id=m["detector_id"],
        )
        for m in raw["members"]
    ]
    return FusedDetection(
        box=BoundingBox.from_list(raw["box"]),
        class_label=raw["class"],
        confidence=raw["confidence"],
        member_detections=members,
        source_detectors=raw["source_detectors"],
    )


def photo_to_json(photo: PhotoRecord) -> Dict[str, Any]:
    return {
        "photo_id": photo.photo_id,
        "photographer_id": photo.photographer_id,
        "capture_date": photo.capture_date.isoformat() if photo.capture_date else None,
        "width": photo.image_width,
        "height": photo.image_height,
        "detections": [_fused_to_json(d) for d in photo.fused_detections],
    }


def photo_from_json(raw: Dict[str, Any]) -> PhotoRecord:
    return PhotoRecord(
        photo_id=raw["photo_id"],
        photographer_id=raw["photographer_id"],
        capture_date=raw.get("capture_date"),
        image_width=raw["width"],
        image_height=raw["height"],
        fused_detections=[_fused_from_json(d) for d in raw.get("detections", [])],
    )


class FileStore(MemoryStore):
    """Photo records persisted as fused.json, with CSV writers for reports."""

    def __init__(self, fused_path: Optional[str] = None):
        super().__init__()
        self.fused_path = fused_path

    def load(self, path: Optional[str] = None) -> List[PhotoRecord]:
        """Read fused.json into the in-memory cache."""
        path = path or self.fused_path
        if not path or not os.path.isfile(path):
            raise InvalidInputError(f"Fused detections file not found: {path}")
        with open(path, "r", encoding="utf-8") as f:
            try:
                payload = json.load(f)
            except json.JSONDecodeError as e:
                raise InvalidInputError(f"{path} is not valid JSON: {e}")

        try:
            photos = [photo_from_json(p) for p in payload["photos"]]
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidInputError(f"{path} is not a fused detections file: {e}")
        for photo in photos:
            self.put_photo(photo)
        logger.info(f"Loaded {len(photos)} photos from {path}")
        return self.list_photos()

    def save(self, path: Optional[str] = None) -> str:
        """Write all photos to fused.json in photo_id order."""
        path = path or self.fused_path
        if not path:
            raise InvalidInputError("No output path for fused detections")
        payload = {
            "version": FUSED_FORMAT_VERSION,
            "photos": [photo_to_json(p) for p in self.list_photos()],
        }
        write_text(path, json.dumps(payload, indent=2, ensure_ascii=False) + "\n")
        logger.info(f"Persisted {len(payload['photos'])} photos to {path}")
        return path


def write_text(path: str, text: str) -> None:
    """Write UTF-8 text with LF line endings."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def write_csv(path: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    write_text(path, render_csv(header, rows))
    logger.info(f"Wrote {len(rows)} rows to {path}")
