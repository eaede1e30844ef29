"""SSD export adapter."""

from archive_lens.detectors.base_detector import BaseDetector


class SSDDetector(BaseDetector):
    """SSD with a 512 x 512 input."""

    def __init__(self):
        super().__init__("ssd", "SSD512", (512, 512), 0.5)
        self.register_label_aliases({"aeroplane": "airplane", "motorbike": "motorcycle"},
                                    drop=("background",))
