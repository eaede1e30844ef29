"""Detector export adapters for the archive-lens toolkit."""

from typing import Dict

from archive_lens.detectors.base_detector import BaseDetector
from archive_lens.detectors.maskrcnn_detector import MaskRCNNDetector
from archive_lens.detectors.retinanet_detector import RetinaNetDetector
from archive_lens.detectors.ssd_detector import SSDDetector
from archive_lens.detectors.yolo_detector import YOLOv3Detector


def build_detector_registry() -> Dict[str, BaseDetector]:
    """All known adapters keyed by detector id."""
    detectors = [SSDDetector(), YOLOv3Detector(), RetinaNetDetector(), MaskRCNNDetector()]
    return {d.detector_id: d for d in detectors}


def default_thresholds() -> Dict[str, float]:
    """Confidence thresholds applied before fusion, as carried by each adapter."""
    return {d.detector_id: d.default_threshold for d in build_detector_registry().values()}
