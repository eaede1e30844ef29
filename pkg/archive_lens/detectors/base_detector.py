"""Base adapter definition and common functionality for detector exports."""

import logging
from typing import Dict, FrozenSet, Optional, Tuple

logger = logging.getLogger(__name__)


class BaseDetector:
    """Base class for all detector export adapters.

    Adapters never run a network. They describe one detector's export:
    its id, input resolution, default confidence threshold and how its
    class names map onto the shared COCO vocabulary.
    """

    def __init__(
        self,
        detector_id: str,
        display_name: str,
        input_resolution: Tuple[int, int],
        default_threshold: float,
    ):
        """Initialize the base adapter.

        Args:
            detector_id: Id used in detection files and threshold tables
            display_name: Human readable detector name
            input_resolution: (width, height) the detector resized images to
            default_threshold: Confidence threshold applied before fusion
        """
        if not 0.0 <= default_threshold <= 1.0:
            raise ValueError(f"threshold for {detector_id} must be in [0, 1]")
        self.detector_id = detector_id
        self.display_name = display_name
        self.input_resolution = input_resolution
        self.default_threshold = default_threshold
        self.label_aliases: Dict[str, str] = {}
        self.drop_labels: FrozenSet[str] = frozenset()

    def register_label_aliases(self, aliases: Dict[str, str], drop: Tuple[str, ...] = ()) -> None:
        """Register detector-specific class names and labels to discard."""
        self.label_aliases.update({k.lower(): v for k, v in aliases.items()})
        self.drop_labels = self.drop_labels | {d.lower() for d in drop}
        logger.debug(f"Registered {len(aliases)} label aliases for {self.detector_id}")

    def normalize_label(self, label: str) -> Optional[str]:
        """COCO name for a raw label, or None if the label is discarded."""
        key = " ".join(label.strip().lower().split())
        if not key or key in self.drop_labels:
            return None
        return self.label_aliases.get(key, key)

    def resolution_note(self) -> str:
        width, height = self.input_resolution
        return f"{width}x{height}"

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.detector_id!r}, threshold={self.default_threshold})"
