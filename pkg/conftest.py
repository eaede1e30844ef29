"""Shared fixtures for the archive-lens test suite."""

import os
from datetime import date

import pytest

os.environ.setdefault("ARCHIVE_LENS_LOG_LEVEL", "WARNING")

from archive_lens.fusion import FusionConfig, fuse_image
from archive_lens.models import BoundingBox, Detection, FusedDetection, PhotoRecord


@pytest.fixture
def make_detection():
    def factory(x_min, y_min, x_max, y_max, confidence=0.9, detector_id="ssd", label="person"):
        return Detection(
            box=BoundingBox(x_min=x_min, y_min=y_min, x_max=x_max, y_max=y_max),
            class_label=label,
            confidence=confidence,
            detector_id=detector_id,
        )
    return factory


@pytest.fixture
def make_fused(make_detection):
    def factory(x_min, y_min, x_max, y_max, label="person", confidence=0.9):
        member = make_detection(x_min, y_min, x_max, y_max, confidence, "ssd", label)
        return FusedDetection(
            box=member.box, class_label=label, confidence=confidence,
            member_detections=[member], source_detectors=["ssd"],
        )
    return factory


@pytest.fixture
def make_photo():
    def factory(photo_id, photographer_id, detections=(), capture_date=date(1941, 6, 25),
                width=100, height=100):
        return PhotoRecord(
            photo_id=photo_id,
            photographer_id=photographer_id,
            capture_date=capture_date,
            image_width=width,
            image_height=height,
            fused_detections=list(detections),
        )
    return factory


@pytest.fixture
def four_detector_person(make_detection):
    """One person seen by all four detectors with slightly different boxes."""
    return [
        make_detection(10, 10, 50, 90, 0.80, "ssd"),
        make_detection(12, 8, 52, 88, 0.95, "yolov3"),
        make_detection(9, 11, 49, 91, 0.55, "retinanet"),
        make_detection(11, 10, 51, 92, 0.85, "mask_rcnn"),
    ]


@pytest.fixture
def fusion_config():
    return FusionConfig()


@pytest.fixture
def fused_person(four_detector_person, fusion_config):
    return fuse_image(four_detector_person, fusion_config)
