"""RetinaNet export adapter."""

from archive_lens.detectors.base_detector import BaseDetector


class RetinaNetDetector(BaseDetector):
    """RetinaNet, shorter side resized to 800 and longer side capped at 1333."""

    def __init__(self):
        super().__init__("retinanet", "RetinaNet", (1333, 800), 0.3)
        self.register_label_aliases({"aeroplane": "airplane", "motorbike": "motorcycle"})

    def resolution_note(self) -> str:
        return "800/1333"
