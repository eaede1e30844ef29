"""Image preprocessing: histogram equalization of the HSV value channel."""

import logging
import os
from typing import Optional

import cv2
import numpy as np

from archive_lens.errors import InvalidInputError

logger = logging.getLogger(__name__)


def equalization_lut(channel: np.ndarray) -> np.ndarray:
    """256-entry lookup table v' = round(255 * (cdf(v) - cdf_min) / (N - cdf_min)).

    A single-valued channel has N == cdf_min and maps everything to 0.
    Rounding is half-to-even.
    """
    if channel.size == 0:
        raise InvalidInputError("cannot equalize an image without pixels")
    if channel.dtype != np.uint8:
        raise InvalidInputError(f"expected an 8-bit channel, got {channel.dtype}")

    hist = np.bincount(channel.ravel(), minlength=256)
    cdf = np.cumsum(hist)
    total = int(cdf[-1])
    cdf_min = int(cdf[np.flatnonzero(hist)[0]])
    if total == cdf_min:
        return np.zeros(256, dtype=np.uint8)

    scaled = 255.0 * (cdf - cdf_min) / (total - cdf_min)
    return np.clip(np.rint(scaled), 0, 255).astype(np.uint8)


def equalize_channel(channel: np.ndarray) -> np.ndarray:
    return equalization_lut(channel)[channel]


def equalize_value_channel(hsv: np.ndarray) -> np.ndarray:
    """Equalize V of an HSV image; H and S are returned unchanged."""
    if hsv.ndim != 3 or hsv.shape[2] != 3:
        raise InvalidInputError(f"expected an H x W x 3 HSV image, got shape {hsv.shape}")
    out = hsv.copy()
    out[:, :, 2] = equalize_channel(hsv[:, :, 2])
    return out


def hist_equalize(image: np.ndarray) -> np.ndarray:
    """Equalize a BGR image on its HSV value channel; 2-D grayscale images directly."""
    image = np.asarray(image)
    if image.size == 0:
        raise InvalidInputError("cannot equalize an image without pixels")
    if image.dtype != np.uint8:
        raise InvalidInputError(f"expected an 8-bit image, got {image.dtype}")
    if image.ndim == 2:
        return equalize_channel(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise InvalidInputError(f"expected a grayscale or 3-channel image, got shape {image.shape}")

    hsv = cv2.cvtColor(image, cv2.COLOR_BGR2HSV)
    return cv2.cvtColor(equalize_value_channel(hsv), cv2.COLOR_HSV2BGR)


def preprocess_image(image: np.ndarray, size: Optional[int] = None) -> np.ndarray:
    """Equalize, then optionally resize to ``size`` x ``size`` for the classifier."""
    equalized = hist_equalize(image)
    if size is None:
        return equalized
    if size <= 0:
        raise InvalidInputError(f"size must be positive, got {size}")
    return cv2.resize(equalized, (size, size), interpolation=cv2.INTER_AREA)


def load_image(path: str) -> np.ndarray:
    if not os.path.isfile(path):
        raise InvalidInputError(f"Image not found: {path}")
    image = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if image is None:
        raise InvalidInputError(f"Could not decode image: {path}")
    if image.ndim == 3 and image.shape[2] == 4:
        image = cv2.cvtColor(image, cv2.COLOR_BGRA2BGR)
    return image


def save_image(path: str, image: np.ndarray) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    if not cv2.imwrite(path, image):
        raise InvalidInputError(f"Could not write image: {path}")
    logger.debug(f"Wrote {path}")
