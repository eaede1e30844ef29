"""Per-photographer content statistics, grouped splits, class weights and confusion summaries."""

import logging
from collections import Counter, defaultdict
from datetime import date
from enum import Enum
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from archive_lens.config import DEFAULT_CLASSES, DEFAULT_SPLIT_FRACTIONS, PERSON_LABEL
from archive_lens.errors import InvalidInputError
from archive_lens.models import PhotoRecord
from archive_lens.utils import natural_key

logger = logging.getLogger(__name__)

PROBABILITY_EPSILON = 1e-12


class PhotographerStats(BaseModel):
    """One row of the content table."""

    photographer_id: str
    photo_count: int = Field(ge=0)
    objects_per_image: float = Field(ge=0.0)
    person_image_ratio: float = Field(ge=0.0, le=1.0)
    persons_per_person_image: float = Field(ge=0.0)
    per_class_per_100_images: Dict[str, float]

    def column(self, name: str) -> float:
        if name in self.per_class_per_100_images:
            return self.per_class_per_100_images[name]
        return float(getattr(self, name))


STAT_COLUMNS = ("objects_per_image", "person_image_ratio", "persons_per_person_image")


def _by_photographer(photos: Iterable[PhotoRecord]) -> Dict[str, List[PhotoRecord]]:
    grouped: Dict[str, List[PhotoRecord]] = defaultdict(list)
    for photo in photos:
        grouped[photo.photographer_id].append(photo)
    return grouped


def content_stats(
    photos: Sequence[PhotoRecord],
    classes_of_interest: Sequence[str] = DEFAULT_CLASSES,
    person_label: str = PERSON_LABEL,
) -> List[PhotographerStats]:
    """Object occurrence statistics per photographer.

    ``objects_per_image`` counts only detections of ``classes_of_interest``.
    ``persons_per_person_image`` averages over photos with at least one
    person and is 0 when a photographer has none.
    """
    classes = list(dict.fromkeys(classes_of_interest))
    if not classes:
        raise InvalidInputError("classes_of_interest must not be empty")

    stats = []
    grouped = _by_photographer(photos)
    for photographer_id in sorted(grouped, key=natural_key):
        own = grouped[photographer_id]
        n = len(own)
        person_counts = [p.count(person_label) for p in own]
        person_photos = sum(1 for c in person_counts if c > 0)
        class_totals = {c: sum(p.count(c) for p in own) for c in classes}

        stats.append(PhotographerStats(
            photographer_id=photographer_id,
            photo_count=n,
            objects_per_image=sum(class_totals.values()) / n,
            person_image_ratio=person_photos / n,
            persons_per_person_image=(sum(person_counts) / person_photos) if person_photos else 0.0,
            per_class_per_100_images={c: 100.0 * class_totals[c] / n for c in classes},
        ))

    logger.info(f"Computed content statistics for {len(stats)} photographers "
                f"over {len(photos)} photos")
    return stats


def average_stats(stats: Sequence[PhotographerStats], label: str = "Avg") -> PhotographerStats:
    """Column-wise mean over photographers (each photographer weighs equally)."""
    if not stats:
        raise InvalidInputError("cannot average an empty statistics table")
    classes = list(stats[0].per_class_per_100_images)
    count = len(stats)
    return PhotographerStats(
        photographer_id=label,
        photo_count=sum(s.photo_count for s in stats),
        objects_per_image=sum(s.objects_per_image for s in stats) / count,
        person_image_ratio=sum(s.person_image_ratio for s in stats) / count,
        persons_per_person_image=sum(s.persons_per_person_image for s in stats) / count,
        per_class_per_100_images={
            c: sum(s.per_class_per_100_images.get(c, 0.0) for s in stats) / count
            for c in classes
        },
    )


def class_extremes(stats: Sequence[PhotographerStats]) -> Dict[str, Tuple[str, str]]:
    """For every column, the photographers with the highest and lowest value."""
    if not stats:
        return {}
    columns = list(STAT_COLUMNS) + list(stats[0].per_class_per_100_images)
    extremes = {}
    for column in columns:
        highest = max(stats, key=lambda s: s.column(column))
        lowest = min(stats, key=lambda s: s.column(column))
        extremes[column] = (highest.photographer_id, lowest.photographer_id)
    return extremes


# Dataset splitting

class Split(str, Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"


SPLIT_ORDER = (Split.TRAIN, Split.VALIDATION, Split.TEST)


class SplitAssignment(BaseModel):
    """Split of every photo; same-day photos of a photographer share a split."""

    assignments: Dict[str, Split]

    def counts(self) -> Dict[Split, int]:
        counts = {s: 0 for s in SPLIT_ORDER}
        for split in self.assignments.values():
            counts[split] += 1
        return counts

    def fractions(self) -> Dict[Split, float]:
        total = len(self.assignments)
        return {s: (c / total if total else 0.0) for s, c in self.counts().items()}


def _check_fractions(fractions: Sequence[float]) -> Tuple[float, float, float]:
    if len(fractions) != 3:
        raise InvalidInputError(f"need (train, validation, test) fractions, got {fractions}")
    if any(f <= 0 for f in fractions):
        raise InvalidInputError(f"split fractions must be positive, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise InvalidInputError(f"split fractions must sum to 1, got {sum(fractions)}")
    return tuple(float(f) for f in fractions)


def _same_day_groups(photos: Sequence[PhotoRecord]) -> Dict[str, List[List[PhotoRecord]]]:
    """(photographer, date) groups per photographer; undated photos stand alone."""
    id_counts = Counter(p.photo_id for p in photos)
    duplicates = sorted(pid for pid, n in id_counts.items() if n > 1)
    if duplicates:
        raise InvalidInputError(f"duplicate photo ids: {', '.join(duplicates)}")

    keyed: Dict[str, Dict[tuple, List[PhotoRecord]]] = defaultdict(lambda: defaultdict(list))
    for photo in photos:
        if photo.capture_date is None:
            key = (1, "", photo.photo_id)
        else:
            key = (0, photo.capture_date.isoformat(), "")
        keyed[photo.photographer_id][key].append(photo)

    return {
        photographer_id: [
            sorted(groups[key], key=lambda p: natural_key(p.photo_id)) for key in sorted(groups)
        ]
        for photographer_id, groups in keyed.items()
    }


def split_dataset(
    photos: Sequence[PhotoRecord],
    fractions: Sequence[float] = DEFAULT_SPLIT_FRACTIONS,
    seed: int = 0,
) -> SplitAssignment:
    """Random grouped split.

    Within each photographer, same-day groups are visited largest first
    (equal sizes in seeded random order) and each goes to the split that is
    furthest below its target photo count. The shortfall left by earlier
    photographers is carried over, so rounding inside small photographers
    does not accumulate into one split. Exact ties are broken by the seeded
    generator.
    """
    fractions = _check_fractions(fractions)
    rng = np.random.default_rng(seed)
    assignments: Dict[str, Split] = {}
    carry = np.zeros(3)

    grouped = _same_day_groups(photos)
    for photographer_id in sorted(grouped, key=natural_key):
        groups = grouped[photographer_id]
        order = rng.permutation(len(groups))
        order = sorted(order, key=lambda i: -len(groups[i]))

        total = sum(len(g) for g in groups)
        targets = np.asarray(fractions) * total
        filled = np.zeros(3)
        for index in order:
            deficits = targets - filled + carry
            tied = np.flatnonzero(deficits >= deficits.max() - 1e-9)
            target = int(tied[0]) if len(tied) == 1 else int(rng.choice(tied))
            filled[target] += len(groups[index])
            for photo in groups[index]:
                assignments[photo.photo_id] = SPLIT_ORDER[target]
        carry += targets - filled

    result = SplitAssignment(assignments=dict(sorted(assignments.items(),
                                                     key=lambda kv: natural_key(kv[0]))))
    logger.info(f"Split {len(photos)} photos: "
                + ", ".join(f"{s.value}={c}" for s, c in result.counts().items()))
    return result


def split_by_capture_time(
    photos: Sequence[PhotoRecord],
    fractions: Sequence[float] = DEFAULT_SPLIT_FRACTIONS,
) -> SplitAssignment:
    """Chronological grouped split: each photographer's earliest days train, the latest test.

    A group goes to the split whose cumulative target range contains the
    group's midpoint in the running photo count. Undated photos come last.
    """
    fractions = _check_fractions(fractions)
    assignments: Dict[str, Split] = {}

    for photographer_id, groups in _same_day_groups(photos).items():
        total = sum(len(g) for g in groups)
        bounds = (fractions[0] * total, (fractions[0] + fractions[1]) * total)
        assigned = 0
        for group in groups:
            midpoint = assigned + len(group) / 2.0
            if midpoint < bounds[0]:
                split = Split.TRAIN
            elif midpoint < bounds[1]:
                split = Split.VALIDATION
            else:
                split = Split.TEST
            for photo in group:
                assignments[photo.photo_id] = split
            assigned += len(group)

    return SplitAssignment(assignments=dict(sorted(assignments.items(),
                                                   key=lambda kv: natural_key(kv[0]))))


def straddling_groups(photos: Sequence[PhotoRecord], split: SplitAssignment) -> List[Tuple[str, Optional[date]]]:
    """(photographer, date) groups whose photos landed in more than one split."""
    splits_seen: Dict[Tuple[str, date], set] = defaultdict(set)
    for photo in photos:
        if photo.capture_date is not None:
            splits_seen[(photo.photographer_id, photo.capture_date)].add(split.assignments[photo.photo_id])
    return sorted((key for key, seen in splits_seen.items() if len(seen) > 1),
                  key=lambda k: (natural_key(k[0]), k[1]))


# Class weighting and weighted loss

class ClassWeights(BaseModel):
    """Inverse-frequency weights w_c = N / (N_c * C)."""

    weights: Dict[int, float]
    counts: Dict[int, int]
    total: int = Field(gt=0)
    num_classes: int = Field(gt=0)
    labels: Optional[List[str]] = None

    def exact_weight(self, class_index: int) -> Fraction:
        return Fraction(self.total, self.counts[class_index] * self.num_classes)

    def label_of(self, class_index: int) -> str:
        return self.labels[class_index] if self.labels else str(class_index)


def class_weights(counts: Mapping[int, int], labels: Optional[Sequence[str]] = None) -> ClassWeights:
    """Balanced class weights from per-class sample counts."""
    if not counts:
        raise InvalidInputError("class counts must not be empty")
    empty = sorted(c for c, n in counts.items() if n <= 0)
    if empty:
        raise InvalidInputError(f"weight undefined for classes without samples: {empty}")

    total = sum(int(n) for n in counts.values())
    num_classes = len(counts)
    weights = {
        int(c): float(Fraction(total, int(n) * num_classes)) for c, n in sorted(counts.items())
    }
    return ClassWeights(
        weights=weights,
        counts={int(c): int(n) for c, n in sorted(counts.items())},
        total=total,
        num_classes=num_classes,
        labels=list(labels) if labels is not None else None,
    )


def class_weights_from_labels(labels: Sequence[str]) -> ClassWeights:
    """Class weights from a list of per-sample labels; indices follow natural label order."""
    vocabulary = sorted(set(labels), key=natural_key)
    index = {label: i for i, label in enumerate(vocabulary)}
    counts: Dict[int, int] = defaultdict(int)
    for label in labels:
        counts[index[label]] += 1
    return class_weights(dict(counts), labels=vocabulary)


def _checked_probabilities(predicted_probs, true_labels) -> Tuple[np.ndarray, np.ndarray]:
    probs = np.asarray(predicted_probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[0] == 0:
        raise InvalidInputError(f"expected a non-empty N x C probability array, got shape {probs.shape}")
    labels = np.asarray(true_labels)
    if labels.shape != (probs.shape[0],):
        raise InvalidInputError(f"expected {probs.shape[0]} labels, got {labels.shape[0] if labels.ndim else 0}")
    if not np.issubdtype(labels.dtype, np.integer):
        raise InvalidInputError("true labels must be integer class indices")
    if labels.min() < 0 or labels.max() >= probs.shape[1]:
        raise InvalidInputError(f"label out of range [0, {probs.shape[1]})")
    row_sums = probs.sum(axis=1)
    bad = np.flatnonzero(np.abs(row_sums - 1.0) > 1e-6)
    if bad.size:
        raise InvalidInputError(f"probability rows {bad[:5].tolist()} do not sum to 1")
    return probs, labels


def weighted_cross_entropy(
    predicted_probs,
    true_labels,
    weights: Optional[ClassWeights] = None,
    epsilon: float = PROBABILITY_EPSILON,
) -> float:
    """Mean over samples of -w_{y_i} * log p_i(y_i); per-sample weight inside the mean."""
    probs, labels = _checked_probabilities(predicted_probs, true_labels)
    if weights is None:
        sample_weights = np.ones(len(labels))
    else:
        missing = sorted(set(labels.tolist()) - set(weights.weights))
        if missing:
            raise InvalidInputError(f"no class weight for classes {missing}")
        sample_weights = np.array([weights.weights[int(c)] for c in labels])

    true_probs = np.clip(probs[np.arange(len(labels)), labels], epsilon, 1.0)
    return float(np.mean(-sample_weights * np.log(true_probs))) + 0.0


def cross_entropy(predicted_probs, true_labels, epsilon: float = PROBABILITY_EPSILON) -> float:
    """Unweighted categorical cross-entropy."""
    return weighted_cross_entropy(predicted_probs, true_labels, None, epsilon)


# Confusion matrices

class ConfusionMatrix(BaseModel):
    """Rows are true photographers, columns predicted ones."""

    labels: List[str]
    counts: List[List[int]]

    @model_validator(mode="after")
    def _square(self) -> "ConfusionMatrix":
        size = len(self.labels)
        if len(self.counts) != size or any(len(row) != size for row in self.counts):
            raise ValueError(f"confusion matrix must be {size}x{size}")
        if any(c < 0 for row in self.counts for c in row):
            raise ValueError("confusion counts must be non-negative")
        return self


class ConfusionSummary(BaseModel):
    labels: List[str]
    per_class_accuracy: List[Optional[float]]
    row_totals: List[int]
    overall_accuracy: float = Field(ge=0.0, le=1.0)


def confusion_stats(matrix: ConfusionMatrix) -> ConfusionSummary:
    """Per-class recall (None for empty rows) and overall accuracy."""
    counts = np.asarray(matrix.counts, dtype=np.int64).reshape(len(matrix.labels), len(matrix.labels))
    row_totals = counts.sum(axis=1)
    total = int(row_totals.sum())
    if total == 0:
        raise InvalidInputError("confusion matrix has no samples")

    diagonal = np.diag(counts)
    per_class = [
        (int(d) / int(n) if n > 0 else None) for d, n in zip(diagonal, row_totals)
    ]
    return ConfusionSummary(
        labels=list(matrix.labels),
        per_class_accuracy=per_class,
        row_totals=[int(n) for n in row_totals],
        overall_accuracy=int(diagonal.sum()) / total,
    )


def confusion_from_predictions(predicted_probs, true_labels, labels: Sequence[str]) -> ConfusionMatrix:
    """Tally argmax predictions (ties go to the lowest class index)."""
    probs, truth = _checked_probabilities(predicted_probs, true_labels)
    if probs.shape[1] != len(labels):
        raise InvalidInputError(f"{probs.shape[1]} probability columns but {len(labels)} labels")
    predicted = np.argmax(probs, axis=1)
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    np.add.at(counts, (truth, predicted), 1)
    return ConfusionMatrix(labels=list(labels), counts=counts.tolist())


def top_confusions(matrix: ConfusionMatrix, n: int = 3) -> List[Tuple[str, str, int, float]]:
    """Most frequent off-diagonal cells as (true, predicted, count, share of the true row)."""
    cells = []
    for i, row in enumerate(matrix.counts):
        row_total = sum(row)
        for j, count in enumerate(row):
            if i != j and count > 0:
                cells.append((-count, i, j, count / row_total))
    cells.sort()
    return [(matrix.labels[i], matrix.labels[j], -neg, rate) for neg, i, j, rate in cells[:n]]
