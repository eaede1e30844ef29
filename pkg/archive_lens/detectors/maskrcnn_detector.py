"""Mask R-CNN export adapter."""

from archive_lens.detectors.base_detector import BaseDetector


class MaskRCNNDetector(BaseDetector):
    """Mask R-CNN run on 960 x 540 inputs; class 0 is background."""

    def __init__(self):
        super().__init__("mask_rcnn", "Mask R-CNN", (960, 540), 0.7)
        self.register_label_aliases({}, drop=("bg", "background"))
