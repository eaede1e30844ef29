"""Shared domain types: boxes, detections, photo records and feature vectors.

All coordinates are pixels in the original image frame, origin top-left.
Models are pydantic and validate their invariants at construction; a
violation raises ``pydantic.ValidationError`` (a ``ValueError``).
"""

import math
from datetime import date
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class BoundingBox(BaseModel):
    """Axis-aligned rectangle; zero-area boxes are valid."""

    model_config = ConfigDict(frozen=True)

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    @model_validator(mode="after")
    def _check_extent(self) -> "BoundingBox":
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(c) for c in coords):
            raise ValueError(f"box coordinates must be finite, got {coords}")
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"box has negative extent: {coords}")
        return self

    @classmethod
    def from_list(cls, coords: List[float]) -> "BoundingBox":
        if len(coords) != 4:
            raise ValueError(f"box needs 4 coordinates, got {len(coords)}")
        x_min, y_min, x_max, y_max = (float(c) for c in coords)
        return cls(x_min=x_min, y_min=y_min, x_max=x_max, y_max=y_max)

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_list(self) -> List[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]

    def clip(self, image_width: float, image_height: float) -> "BoundingBox":
        """Clamp the box to [0, image_width] x [0, image_height]."""
        x_min = min(max(self.x_min, 0.0), image_width)
        y_min = min(max(self.y_min, 0.0), image_height)
        x_max = min(max(self.x_max, 0.0), image_width)
        y_max = min(max(self.y_max, 0.0), image_height)
        return BoundingBox(x_min=x_min, y_min=y_min, x_max=x_max, y_max=y_max)


class BoxShape(BaseModel):
    """Width and height of a box, used for anchor clustering."""

    model_config = ConfigDict(frozen=True)

    width: float = Field(gt=0, allow_inf_nan=False)
    height: float = Field(gt=0, allow_inf_nan=False)

    @classmethod
    def of(cls, box: BoundingBox) -> "BoxShape":
        return cls(width=box.width, height=box.height)


class Detection(BaseModel):
    """One class-labelled, confidence-scored box from a single detector."""

    model_config = ConfigDict(frozen=True)

    box: BoundingBox
    class_label: str = Field(min_length=1)
    confidence: float = Field(ge=0.0, le=1.0)
    detector_id: str = Field(min_length=1)

    def sort_key(self) -> Tuple:
        """Descending confidence, then detector id and box corner; a total order."""
        b = self.box
        return (-self.confidence, self.detector_id, b.x_min, b.y_min, b.x_max, b.y_max,
                self.class_label)


class FusedDetection(BaseModel):
    """Consensus box merged from one or more detections of the same class."""

    model_config = ConfigDict(frozen=True)

    box: BoundingBox
    class_label: str = Field(min_length=1)
    confidence: float = Field(ge=0.0, le=1.0)
    member_detections: List[Detection] = Field(min_length=1)
    source_detectors: List[str]

    @field_validator("source_detectors")
    @classmethod
    def _sorted_unique(cls, value: List[str]) -> List[str]:
        return sorted(set(value))

    @model_validator(mode="after")
    def _single_class(self) -> "FusedDetection":
        labels = {d.class_label for d in self.member_detections}
        if labels != {self.class_label}:
            raise ValueError(
                f"members must share class '{self.class_label}', got {sorted(labels)}"
            )
        return self


class PhotoRecord(BaseModel):
    """One archive photograph with its fused detections."""

    photo_id: str = Field(min_length=1)
    photographer_id: str = Field(min_length=1)
    capture_date: Optional[date] = None
    image_width: int = Field(gt=0)
    image_height: int = Field(gt=0)
    fused_detections: List[FusedDetection] = Field(default_factory=list)

    def count(self, class_label: str) -> int:
        return sum(1 for d in self.fused_detections if d.class_label == class_label)


class FeatureVector(BaseModel):
    """Penultimate-layer features of one photo."""

    model_config = ConfigDict(frozen=True)

    values: List[float] = Field(min_length=1)
    photo_id: str
    photographer_id: str

    @field_validator("values")
    @classmethod
    def _finite(cls, value: List[float]) -> List[float]:
        if not all(math.isfinite(v) for v in value):
            raise ValueError("feature values must be finite")
        return value
