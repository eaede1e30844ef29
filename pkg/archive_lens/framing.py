"""Photo framing: close-up, medium shot or overall shot from the largest person box."""

import logging
from collections import Counter, defaultdict
from enum import Enum
from typing import Dict, List, Optional, Sequence

from pydantic import BaseModel, ConfigDict, Field, model_validator

from archive_lens.config import (
    DEFAULT_CLOSEUP_MIN_FRACTION, DEFAULT_OVERALL_MAX_FRACTION, PERSON_LABEL,
)
from archive_lens.errors import InvalidInputError
from archive_lens.geometry import area_fraction
from archive_lens.models import FusedDetection, PhotoRecord
from archive_lens.utils import natural_key

logger = logging.getLogger(__name__)


class FramingClass(str, Enum):
    CLOSE_UP = "close_up"
    MEDIUM_SHOT = "medium_shot"
    OVERALL_SHOT = "overall_shot"


class FramingConfig(BaseModel):
    """Coverage thresholds; exact boundary values count as medium shots."""

    model_config = ConfigDict(extra="forbid")

    closeup_min_fraction: float = DEFAULT_CLOSEUP_MIN_FRACTION
    overall_max_fraction: float = DEFAULT_OVERALL_MAX_FRACTION
    person_label: str = PERSON_LABEL

    @model_validator(mode="after")
    def _ordered(self) -> "FramingConfig":
        if not 0.0 < self.overall_max_fraction < self.closeup_min_fraction < 1.0:
            raise ValueError(
                "need 0 < overall_max_fraction < closeup_min_fraction < 1, got "
                f"{self.overall_max_fraction} and {self.closeup_min_fraction}"
            )
        return self


class FramingDistribution(BaseModel):
    """Per-photographer framing counts; fractions are None when no photo shows people."""

    photographer_id: str
    photo_count: int = Field(ge=0)
    person_photo_count: int = Field(ge=0)
    counts: Dict[FramingClass, int]
    fractions: Optional[Dict[FramingClass, float]] = None

    @property
    def is_empty(self) -> bool:
        return self.fractions is None


def largest_person_fraction(
    detections: Sequence[FusedDetection],
    image_width: float,
    image_height: float,
    person_label: str = PERSON_LABEL,
) -> Optional[float]:
    """Frame coverage of the largest person box, or None without people."""
    if image_width <= 0 or image_height <= 0:
        raise InvalidInputError(
            f"image dimensions must be positive, got {image_width}x{image_height}"
        )
    fractions = [
        area_fraction(d.box, image_width, image_height)
        for d in detections if d.class_label == person_label
    ]
    return max(fractions) if fractions else None


def classify_framing(
    detections: Sequence[FusedDetection],
    image_width: float,
    image_height: float,
    config: Optional[FramingConfig] = None,
) -> Optional[FramingClass]:
    """Framing class of a photo, or None when no person was detected."""
    config = config or FramingConfig()
    fraction = largest_person_fraction(detections, image_width, image_height, config.person_label)
    if fraction is None:
        return None
    if fraction > config.closeup_min_fraction:
        return FramingClass.CLOSE_UP
    if fraction < config.overall_max_fraction:
        return FramingClass.OVERALL_SHOT
    return FramingClass.MEDIUM_SHOT


def classify_photos(
    photos: Sequence[PhotoRecord], config: Optional[FramingConfig] = None
) -> Dict[str, Optional[FramingClass]]:
    """Framing class per photo_id."""
    return {
        photo.photo_id: classify_framing(
            photo.fused_detections, photo.image_width, photo.image_height, config
        )
        for photo in photos
    }


def framing_distribution(
    photos: Sequence[PhotoRecord], config: Optional[FramingConfig] = None
) -> List[FramingDistribution]:
    """Share of close-ups, medium and overall shots among each photographer's people photos."""
    config = config or FramingConfig()
    by_photographer: Dict[str, List[PhotoRecord]] = defaultdict(list)
    for photo in photos:
        by_photographer[photo.photographer_id].append(photo)

    distributions = []
    for photographer_id in sorted(by_photographer, key=natural_key):
        own = by_photographer[photographer_id]
        classes = [
            classify_framing(p.fused_detections, p.image_width, p.image_height, config)
            for p in own
        ]
        tally = Counter(c for c in classes if c is not None)
        person_photos = sum(tally.values())
        counts = {c: tally.get(c, 0) for c in FramingClass}

        fractions = None
        if person_photos:
            fractions = {c: counts[c] / person_photos for c in FramingClass}
        else:
            logger.warning(f"Photographer {photographer_id} has no photos with people; "
                           f"framing distribution left empty")

        distributions.append(FramingDistribution(
            photographer_id=photographer_id,
            photo_count=len(own),
            person_photo_count=person_photos,
            counts=counts,
            fractions=fractions,
        ))
    return distributions
