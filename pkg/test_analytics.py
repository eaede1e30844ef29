"""Tests for content statistics, grouped splits, class weights and confusion summaries."""

import itertools
import math
from datetime import date, timedelta
from fractions import Fraction

import numpy as np
import pytest

from archive_lens.analytics import (
    SPLIT_ORDER, ConfusionMatrix, Split, average_stats, class_extremes, class_weights,
    class_weights_from_labels, confusion_from_predictions, confusion_stats, content_stats,
    cross_entropy, split_by_capture_time, split_dataset, straddling_groups, top_confusions,
    weighted_cross_entropy,
)
from archive_lens.errors import InvalidInputError

CLASSES = ("person", "horse", "car", "tie", "boat")


@pytest.fixture
def table_archive(make_fused, make_photo):
    """20 photos by two photographers with hand-counted detections."""
    def objects(*labels):
        return [make_fused(i, i, i + 10, i + 10, label=label) for i, label in enumerate(labels)]

    first = [
        objects("person"),
        objects("person", "person"),
        objects("person", "person", "person"),
        objects("person", "person"),
        objects("horse"),
        objects("car", "car"),
        objects("cow"),
        [], [], [],
    ]
    second = [
        objects("person", "tie", "tie"),
        objects("person", "boat"),
    ] + [objects("person") for _ in range(6)] + [[], []]

    photos = [make_photo(f"p1-{i}", "P1", d) for i, d in enumerate(first)]
    photos += [make_photo(f"p2-{i}", "P2", d) for i, d in enumerate(second)]
    return photos


def test_content_stats_table(table_archive):
    p1, p2 = content_stats(table_archive, CLASSES)
    assert p1.photographer_id == "P1" and p1.photo_count == 10
    assert p1.person_image_ratio == 0.4
    assert p1.persons_per_person_image == 2.0
    assert p1.objects_per_image == 1.1
    assert p1.per_class_per_100_images == {"person": 80.0, "horse": 10.0, "car": 20.0,
                                           "tie": 0.0, "boat": 0.0}

    assert p2.person_image_ratio == 0.8
    assert p2.persons_per_person_image == 1.0
    assert p2.objects_per_image == 1.1
    assert p2.per_class_per_100_images["tie"] == 20.0
    assert p2.per_class_per_100_images["boat"] == 10.0


def test_average_row_and_extremes(table_archive):
    stats = content_stats(table_archive, CLASSES)
    avg = average_stats(stats)
    assert avg.photographer_id == "Avg"
    assert avg.photo_count == 20
    assert avg.person_image_ratio == pytest.approx(0.6)
    assert avg.persons_per_person_image == pytest.approx(1.5)
    extremes = class_extremes(stats)
    assert extremes["person_image_ratio"] == ("P2", "P1")
    assert extremes["car"] == ("P1", "P2")


def test_content_stats_small_cases(make_fused, make_photo):
    photos = [make_photo("a", "X", [make_fused(0, 0, 1, 1), make_fused(2, 2, 3, 3)]),
              make_photo("b", "X", [])]
    (stats,) = content_stats(photos, ["person"])
    assert stats.person_image_ratio == 0.5
    assert stats.persons_per_person_image == 2.0
    assert stats.per_class_per_100_images["person"] == 100.0
    assert content_stats([], ["person"]) == []


def test_no_person_photos_gives_zero_persons_per_image(make_photo):
    (stats,) = content_stats([make_photo("a", "X")], ["person"])
    assert stats.persons_per_person_image == 0.0
    assert stats.objects_per_image == 0.0


def dated_photos(make_photo, photographer, sizes, start=date(1941, 6, 1)):
    photos = []
    for day, size in enumerate(sizes):
        for j in range(size):
            photos.append(make_photo(f"{photographer}-{day}-{j}", photographer,
                                     capture_date=start + timedelta(days=day)))
    return photos


def test_split_singletons_divisible(make_photo):
    photos = [make_photo(f"s{i}", "A", capture_date=None) for i in range(10)]
    counts = split_dataset(photos, seed=3).counts()
    assert counts == {Split.TRAIN: 6, Split.VALIDATION: 2, Split.TEST: 2}


def test_split_keeps_large_group_whole(make_photo):
    photos = dated_photos(make_photo, "A", [100])
    assert len(set(split_dataset(photos).assignments.values())) == 1


def test_split_matches_exhaustive_optimum(make_photo):
    photos = dated_photos(make_photo, "A", [5, 3, 2])
    split = split_dataset(photos, seed=0)
    counts = split.counts()
    targets = (6, 2, 2)

    def deviation(sizes_per_split):
        return sum(abs(a - t) for a, t in zip(sizes_per_split, targets))

    best = min(
        deviation([sum(s for s, c in zip((5, 3, 2), choice) if c == k) for k in range(3)])
        for choice in itertools.product(range(3), repeat=3)
    )
    assert deviation([counts[s] for s in SPLIT_ORDER]) == best
    assert counts[Split.TRAIN] == 5


def random_archive(rng, make_photo):
    photos = []
    for p in range(int(rng.integers(10, 21))):
        sizes = rng.integers(1, 5, size=int(rng.integers(8, 20)))
        photos += dated_photos(make_photo, f"ph{p}", sizes.tolist())
    return photos


def test_split_properties_on_random_archives(make_photo):
    rng = np.random.default_rng(99)
    for trial in range(100):
        photos = random_archive(rng, make_photo)
        split = split_dataset(photos, seed=trial)
        assert straddling_groups(photos, split) == []
        assert len(split.assignments) == len(photos)
        for s, target in zip(SPLIT_ORDER, (0.6, 0.2, 0.2)):
            assert abs(split.fractions()[s] - target) <= 0.05
        assert split_dataset(photos, seed=trial) == split


@pytest.mark.parametrize("seed", range(5))
def test_split_many_small_photographers_stays_balanced(make_photo, seed):
    photos = []
    for p in range(50):
        photos += dated_photos(make_photo, f"ph{p}", [1, 1, 1])
    split = split_dataset(photos, seed=seed)
    for s, target in zip(SPLIT_ORDER, (0.6, 0.2, 0.2)):
        assert abs(split.fractions()[s] - target) <= 0.05


def test_split_mixed_tiny_photographers_stays_balanced(make_photo):
    rng = np.random.default_rng(5)
    for trial in range(20):
        photos = []
        for p in range(int(rng.integers(30, 51))):
            photos += dated_photos(make_photo, f"ph{p}", [1] * int(rng.integers(1, 4)))
        split = split_dataset(photos, seed=trial)
        assert straddling_groups(photos, split) == []
        for s, target in zip(SPLIT_ORDER, (0.6, 0.2, 0.2)):
            assert abs(split.fractions()[s] - target) <= 0.05


def test_chronological_split(make_photo):
    photos = dated_photos(make_photo, "A", [2] * 10)
    split = split_by_capture_time(photos)
    assert straddling_groups(photos, split) == []
    assert split.counts() == {Split.TRAIN: 12, Split.VALIDATION: 4, Split.TEST: 4}
    assert split.assignments["A-0-0"] == Split.TRAIN
    assert split.assignments["A-9-1"] == Split.TEST


def test_split_rejects_bad_fractions(make_photo):
    with pytest.raises(InvalidInputError):
        split_dataset([make_photo("a", "A")], fractions=(0.5, 0.3, 0.3))


def test_class_weight_examples():
    balanced = class_weights({c: 10 for c in range(12)})
    assert set(balanced.weights.values()) == {1.0}
    assert class_weights({0: 75, 1: 25}).weights == {0: 2 / 3, 1: 2.0}
    assert class_weights({0: 50, 1: 25, 2: 15, 3: 10}).weights[0] == 0.5


def test_class_weight_identity_is_exact():
    rng = np.random.default_rng(1)
    for _ in range(100):
        counts = {c: int(n) for c, n in enumerate(rng.integers(1, 10_000, size=int(rng.integers(1, 20))))}
        weights = class_weights(counts)
        assert sum(counts[c] * weights.exact_weight(c) for c in counts) == Fraction(weights.total)
        assert math.fsum(counts[c] * weights.weights[c] for c in counts) == pytest.approx(weights.total, rel=1e-12)


def test_class_weights_need_samples():
    with pytest.raises(InvalidInputError):
        class_weights({0: 5, 1: 0})


def test_class_weights_from_labels():
    weights = class_weights_from_labels(["b", "a", "a", "a"])
    assert weights.labels == ["a", "b"]
    assert weights.weights == {0: 4 / 6, 1: 2.0}


def test_weighted_cross_entropy_examples():
    assert weighted_cross_entropy([[1.0, 0.0]], [0]) == 0.0
    probs = [[0.5, 0.5], [0.75, 0.25]]
    assert weighted_cross_entropy(probs, [0, 1]) == pytest.approx(-(math.log(0.5) + math.log(0.25)) / 2)

    weights = class_weights({0: 1, 1: 3})
    assert weights.weights[0] == 2.0
    e = math.exp(-1)
    assert weighted_cross_entropy([[e, 1 - e]], [0], weights) == pytest.approx(2.0, abs=1e-12)


def test_unit_weights_match_unweighted_loss():
    rng = np.random.default_rng(3)
    probs = rng.dirichlet(np.ones(3), size=50)
    labels = rng.integers(0, 3, size=50)
    unit = class_weights({0: 5, 1: 5, 2: 5})
    assert weighted_cross_entropy(probs, labels, unit) == pytest.approx(cross_entropy(probs, labels), abs=1e-12)


def test_cross_entropy_label_out_of_range():
    with pytest.raises(InvalidInputError):
        cross_entropy([[0.5, 0.5]], [2])


def test_confusion_stats():
    summary = confusion_stats(ConfusionMatrix(labels=["a", "b"], counts=[[3, 1], [1, 3]]))
    assert summary.per_class_accuracy == [0.75, 0.75]
    assert summary.overall_accuracy == 0.75

    identity = confusion_stats(ConfusionMatrix(labels=["a", "b", "c"], counts=np.eye(3, dtype=int).tolist()))
    assert identity.per_class_accuracy == [1.0, 1.0, 1.0]


def test_confusion_empty_row_and_empty_matrix():
    summary = confusion_stats(ConfusionMatrix(labels=["a", "b"], counts=[[2, 0], [0, 0]]))
    assert summary.per_class_accuracy == [1.0, None]
    with pytest.raises(InvalidInputError):
        confusion_stats(ConfusionMatrix(labels=["a"], counts=[[0]]))


def test_confusion_from_predictions_and_top_confusions():
    probs = [[0.5, 0.5, 0.0], [0.1, 0.8, 0.1], [0.7, 0.2, 0.1], [0.2, 0.2, 0.6], [0.9, 0.05, 0.05]]
    matrix = confusion_from_predictions(probs, [1, 1, 2, 2, 0], ["a", "b", "c"])
    assert matrix.counts == [[1, 0, 0], [1, 1, 0], [1, 0, 1]]
    assert top_confusions(matrix, 2) == [("b", "a", 1, 0.5), ("c", "a", 1, 0.5)]
