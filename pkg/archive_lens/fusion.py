"""Multi-detector fusion: confidence thresholds, greedy IoU grouping and box merging.

Boxes from all detectors are filtered by each detector's own confidence
threshold, split by class, grouped greedily in confidence order and merged
into one consensus box per group.
"""

import logging
import math
from collections import defaultdict
from enum import Enum
from typing import Dict, List, Sequence

from pydantic import BaseModel, ConfigDict, Field, field_validator

from archive_lens.config import DEFAULT_GROUPING_IOU
from archive_lens.detectors import default_thresholds
from archive_lens.errors import ConfigurationError, InvalidInputError
from archive_lens.geometry import iou
from archive_lens.models import BoundingBox, Detection, FusedDetection

logger = logging.getLogger(__name__)


class MergeStrategy(str, Enum):
    MEAN_COORDINATES = "mean_coordinates"
    HIGHEST_CONFIDENCE = "highest_confidence"


class FusionConfig(BaseModel):
    """Thresholds and merge rule for fusing several detectors' outputs."""

    model_config = ConfigDict(extra="forbid")

    per_detector_thresholds: Dict[str, float] = Field(default_factory=default_thresholds)
    grouping_iou_threshold: float = Field(default=DEFAULT_GROUPING_IOU, gt=0.0, le=1.0)
    merge_strategy: MergeStrategy = MergeStrategy.MEAN_COORDINATES

    @field_validator("per_detector_thresholds")
    @classmethod
    def _thresholds_in_range(cls, value: Dict[str, float]) -> Dict[str, float]:
        for detector_id, threshold in value.items():
            if not 0.0 <= threshold <= 1.0:
                raise ValueError(
                    f"threshold for '{detector_id}' must be in [0, 1], got {threshold}"
                )
        return value


def apply_confidence_thresholds(
    detections: Sequence[Detection], config: FusionConfig
) -> List[Detection]:
    """Keep detections whose confidence reaches their detector's threshold."""
    thresholds = config.per_detector_thresholds
    kept = []
    for detection in detections:
        if detection.detector_id not in thresholds:
            raise ConfigurationError(
                f"No confidence threshold configured for detector '{detection.detector_id}'"
            )
        if detection.confidence >= thresholds[detection.detector_id]:
            kept.append(detection)
    return kept


def group_by_iou(detections: Sequence[Detection], theta: float) -> List[List[Detection]]:
    """Greedy grouping of single-class detections.

    The most confident remaining detection seeds a group; every remaining
    detection overlapping the seed with IoU strictly above ``theta`` joins
    it. The group is removed and the procedure repeats.
    """
    remaining = sorted(detections, key=Detection.sort_key)
    groups = []
    while remaining:
        seed = remaining[0]
        group = [seed]
        rest = []
        for detection in remaining[1:]:
            if iou(seed.box, detection.box) > theta:
                group.append(detection)
            else:
                rest.append(detection)
        groups.append(group)
        remaining = rest
    return groups


def _mean(values: List[float]) -> float:
    # Rounding must not push the mean outside the members' envelope.
    return min(max(math.fsum(values) / len(values), min(values)), max(values))


def merge_group(group: Sequence[Detection], strategy: MergeStrategy) -> FusedDetection:
    """Merge one group into a consensus detection; confidence is the members' maximum."""
    if not group:
        raise InvalidInputError("cannot merge an empty group")

    members = sorted(group, key=Detection.sort_key)
    best = members[0]

    if strategy == MergeStrategy.HIGHEST_CONFIDENCE:
        box = best.box
    else:
        box = BoundingBox(
            x_min=_mean([d.box.x_min for d in members]),
            y_min=_mean([d.box.y_min for d in members]),
            x_max=_mean([d.box.x_max for d in members]),
            y_max=_mean([d.box.y_max for d in members]),
        )

    return FusedDetection(
        box=box,
        class_label=best.class_label,
        confidence=best.confidence,
        member_detections=members,
        source_detectors=[d.detector_id for d in members],
    )


def _output_key(fused: FusedDetection) -> tuple:
    b = fused.box
    return (-fused.confidence, fused.class_label, b.x_min, b.y_min, b.x_max, b.y_max,
            len(fused.member_detections))


def fuse_image(per_detector_outputs: Sequence[Detection], config: FusionConfig) -> List[FusedDetection]:
    """Fuse all detectors' boxes for one image into consensus detections."""
    kept = apply_confidence_thresholds(per_detector_outputs, config)

    by_class: Dict[str, List[Detection]] = defaultdict(list)
    for detection in kept:
        by_class[detection.class_label].append(detection)

    fused = []
    for class_label in sorted(by_class):
        for group in group_by_iou(by_class[class_label], config.grouping_iou_threshold):
            fused.append(merge_group(group, config.merge_strategy))

    fused.sort(key=_output_key)
    logger.debug(f"Fused {len(per_detector_outputs)} detections ({len(kept)} above threshold) "
                 f"into {len(fused)} objects")
    return fused
