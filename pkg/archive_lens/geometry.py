"""Bounding-box geometry: IoU, frame coverage and IoU-distance anchor clustering."""

import logging
from typing import List, Sequence

import numpy as np
from pydantic import BaseModel, Field, model_validator

from archive_lens.errors import InvalidInputError
from archive_lens.models import BoundingBox, BoxShape

logger = logging.getLogger(__name__)


class AnchorSet(BaseModel):
    """Result of anchor clustering: k centroid shapes plus the run's bookkeeping."""

    centroids: List[BoxShape]
    k: int = Field(ge=1)
    assignments: List[int] = Field(default_factory=list)
    total_cost: float = 0.0
    cost_history: List[float] = Field(default_factory=list)
    iterations: int = 0

    @model_validator(mode="after")
    def _centroid_count(self) -> "AnchorSet":
        if len(self.centroids) != self.k:
            raise ValueError(f"expected {self.k} centroids, got {len(self.centroids)}")
        return self


def intersection_area(a: BoundingBox, b: BoundingBox) -> float:
    """Area of the overlap of two boxes (0 when disjoint or touching)."""
    width = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    height = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if width <= 0 or height <= 0:
        return 0.0
    return width * height


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union; 0 when the union is empty."""
    overlap = intersection_area(a, b)
    union = a.area + b.area - overlap
    if union <= 0:
        return 0.0
    return overlap / union


def area_fraction(box: BoundingBox, image_width: float, image_height: float) -> float:
    """Share of the image covered by the box after clipping it to the frame."""
    if image_width <= 0 or image_height <= 0:
        raise InvalidInputError(
            f"image dimensions must be positive, got {image_width}x{image_height}"
        )
    clipped = box.clip(image_width, image_height)
    return clipped.area / (image_width * image_height)


def shape_distance(a: BoxShape, b: BoxShape) -> float:
    """1 - IoU of two shapes placed on a common center."""
    overlap = min(a.width, b.width) * min(a.height, b.height)
    union = a.width * a.height + b.width * b.height - overlap
    return 1.0 - overlap / union


def _shape_distances(shapes: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """N x k matrix of 1 - IoU between shapes and centroids."""
    w = np.minimum(shapes[:, None, 0], centroids[None, :, 0])
    h = np.minimum(shapes[:, None, 1], centroids[None, :, 1])
    overlap = w * h
    shape_area = (shapes[:, 0] * shapes[:, 1])[:, None]
    centroid_area = (centroids[:, 0] * centroids[:, 1])[None, :]
    return 1.0 - overlap / (shape_area + centroid_area - overlap)


def _cluster_cost(members: np.ndarray, centroid: np.ndarray) -> float:
    return float(_shape_distances(members, centroid[None, :]).sum())


def anchor_kmeans(
    shapes: Sequence[BoxShape],
    k: int,
    seed: int = 0,
    max_iters: int = 300,
) -> AnchorSet:
    """Cluster box shapes with the 1 - IoU distance.

    Centroids start at k distinct shapes drawn with ``seed``. Each round
    assigns shapes to their nearest centroid and moves every centroid to
    the component-wise mean of its members; a move that would raise the
    cluster's cost is not taken, so the total cost never increases. An
    empty cluster is reseeded with the shape farthest from its centroid.
    """
    if k < 1:
        raise InvalidInputError(f"k must be at least 1, got {k}")
    if len(shapes) < k:
        raise InvalidInputError(f"need at least k={k} shapes, got {len(shapes)}")
    if max_iters < 1:
        raise InvalidInputError(f"max_iters must be at least 1, got {max_iters}")

    points = np.array([[s.width, s.height] for s in shapes], dtype=np.float64)
    rng = np.random.default_rng(seed)

    unique = np.unique(points, axis=0)
    if len(unique) >= k:
        centroids = unique[rng.choice(len(unique), size=k, replace=False)].copy()
    else:
        centroids = points[rng.choice(len(points), size=k, replace=False)].copy()

    assignments = np.full(len(points), -1)
    cost_history: List[float] = []
    iterations = 0

    for iterations in range(1, max_iters + 1):
        distances = _shape_distances(points, centroids)
        nearest = np.argmin(distances, axis=1)
        nearest_cost = distances[np.arange(len(points)), nearest]

        for cluster in range(k):
            if np.any(nearest == cluster):
                continue
            # Reseed with the worst-served shape; it then sits at distance 0.
            farthest = int(np.argmax(nearest_cost))
            centroids[cluster] = points[farthest]
            nearest[farthest] = cluster
            nearest_cost[farthest] = 0.0

        cost_history.append(float(nearest_cost.sum()))
        if np.array_equal(nearest, assignments):
            break
        assignments = nearest

        for cluster in range(k):
            members = points[assignments == cluster]
            if len(members) == 0:
                continue
            mean = members.mean(axis=0)
            if _cluster_cost(members, mean) <= _cluster_cost(members, centroids[cluster]):
                centroids[cluster] = mean

    logger.info(f"Anchor k-means converged to k={k} in {iterations} iterations, "
                f"cost {cost_history[-1]:.6f}")

    return AnchorSet(
        centroids=[BoxShape(width=float(w), height=float(h)) for w, h in centroids],
        k=k,
        assignments=[int(a) for a in assignments],
        total_cost=cost_history[-1],
        cost_history=cost_history,
        iterations=iterations,
    )
