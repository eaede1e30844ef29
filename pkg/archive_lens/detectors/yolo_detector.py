"""YOLOv3 export adapter."""

from archive_lens.detectors.base_detector import BaseDetector

# Darknet class names that differ from COCO
DARKNET_ALIASES = {
    "aeroplane": "airplane",
    "motorbike": "motorcycle",
    "sofa": "couch",
    "pottedplant": "potted plant",
    "diningtable": "dining table",
    "tvmonitor": "tv",
}


class YOLOv3Detector(BaseDetector):
    """YOLOv3 with a 416 x 416 input."""

    def __init__(self):
        super().__init__("yolov3", "YOLOv3-416", (416, 416), 0.6)
        self.register_label_aliases(DARKNET_ALIASES)
