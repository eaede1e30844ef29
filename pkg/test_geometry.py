"""Tests for box overlap measures and anchor clustering."""

import numpy as np
import pytest
from pydantic import ValidationError

from archive_lens.errors import InvalidInputError
from archive_lens.geometry import anchor_kmeans, area_fraction, intersection_area, iou, shape_distance
from archive_lens.models import BoundingBox, BoxShape


def box(*coords):
    return BoundingBox.from_list(list(coords))


def rasterized_iou(a, b, size=100):
    """Oracle: count unit cells covered on an integer grid."""
    grid = np.zeros((2, size, size), dtype=bool)
    for layer, (x0, y0, x1, y1) in enumerate((a, b)):
        grid[layer, y0:y1, x0:x1] = True
    union = np.sum(grid[0] | grid[1])
    if union == 0:
        return 0.0
    return float(np.sum(grid[0] & grid[1])) / float(union)


def test_iou_examples():
    assert iou(box(0, 0, 10, 10), box(0, 0, 10, 10)) == 1.0
    assert iou(box(0, 0, 1, 1), box(5, 5, 6, 6)) == 0.0
    assert iou(box(0, 0, 2, 2), box(1, 1, 3, 3)) == pytest.approx(1 / 7, abs=1e-12)


def test_iou_touching_and_degenerate_boxes():
    assert iou(box(0, 0, 1, 1), box(1, 0, 2, 1)) == 0.0
    assert iou(box(3, 3, 3, 3), box(3, 3, 3, 3)) == 0.0
    assert intersection_area(box(0, 0, 4, 4), box(2, 2, 6, 6)) == 4.0


def test_iou_matches_rasterization_oracle():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        coords = rng.integers(0, 101, size=(2, 4))
        a = (min(coords[0, 0], coords[0, 2]), min(coords[0, 1], coords[0, 3]),
             max(coords[0, 0], coords[0, 2]), max(coords[0, 1], coords[0, 3]))
        b = (min(coords[1, 0], coords[1, 2]), min(coords[1, 1], coords[1, 3]),
             max(coords[1, 0], coords[1, 2]), max(coords[1, 1], coords[1, 3]))
        a, b = tuple(int(v) for v in a), tuple(int(v) for v in b)
        value = iou(box(*a), box(*b))
        assert value == rasterized_iou(a, b)
        assert value == iou(box(*b), box(*a))
        assert 0.0 <= value <= 1.0


def test_negative_extent_rejected():
    with pytest.raises(ValidationError):
        box(5, 0, 1, 1)


def test_area_fraction_examples():
    assert area_fraction(box(0, 0, 640, 480), 640, 480) == 1.0
    assert area_fraction(box(0, 0, 0, 0), 640, 480) == 0.0
    assert area_fraction(box(0, 0, 30, 20), 100, 100) == pytest.approx(0.06, abs=1e-15)


def test_area_fraction_clips_and_is_scale_invariant():
    assert area_fraction(box(-10, -10, 50, 50), 100, 100) == pytest.approx(0.25)
    small = area_fraction(box(10, 20, 40, 50), 100, 80)
    large = area_fraction(box(30, 60, 120, 150), 300, 240)
    assert small == pytest.approx(large, abs=1e-12)


@pytest.mark.parametrize("width,height", [(0, 10), (10, 0), (-5, 10)])
def test_area_fraction_rejects_bad_dimensions(width, height):
    with pytest.raises(InvalidInputError):
        area_fraction(box(0, 0, 1, 1), width, height)


def test_shape_distance_examples():
    assert shape_distance(BoxShape(width=10, height=13), BoxShape(width=10, height=13)) == 0.0
    assert shape_distance(BoxShape(width=10, height=10), BoxShape(width=20, height=20)) == pytest.approx(0.75)
    assert shape_distance(BoxShape(width=10, height=20), BoxShape(width=20, height=10)) == pytest.approx(2 / 3)


def test_kmeans_single_cluster():
    anchors = anchor_kmeans([BoxShape(width=10, height=10)] * 5, k=1)
    assert anchors.centroids == [BoxShape(width=10, height=10)]
    assert anchors.total_cost == 0.0


def test_kmeans_two_obvious_clusters():
    shapes = [BoxShape(width=w, height=w) for w in (10, 10, 100, 100)]
    anchors = anchor_kmeans(shapes, k=2, seed=3)
    found = sorted((c.width, c.height) for c in anchors.centroids)
    assert found == [(10.0, 10.0), (100.0, 100.0)]
    assert anchors.assignments[0] == anchors.assignments[1] != anchors.assignments[2]


def test_kmeans_k_equals_point_count():
    shapes = [BoxShape(width=5 + 7 * i, height=3 + 11 * i) for i in range(9)]
    anchors = anchor_kmeans(shapes, k=9, seed=1)
    assert anchors.total_cost == 0.0
    assert sorted(anchors.assignments) == list(range(9))


def test_kmeans_cost_never_increases_and_is_deterministic():
    rng = np.random.default_rng(11)
    shapes = [BoxShape(width=float(w), height=float(h)) for w, h in rng.uniform(5, 300, size=(200, 2))]
    first = anchor_kmeans(shapes, k=6, seed=4)
    second = anchor_kmeans(shapes, k=6, seed=4)
    assert first == second
    history = first.cost_history
    assert all(b <= a + 1e-9 for a, b in zip(history, history[1:]))


def test_kmeans_needs_enough_shapes():
    with pytest.raises(InvalidInputError):
        anchor_kmeans([BoxShape(width=1, height=1)], k=2)
