"""Photographer signatures and the pairwise Earth Mover's Distance matrix."""

import logging
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, model_validator

from archive_lens.config import DEFAULT_SIGNATURE_CAP
from archive_lens.errors import InvalidInputError
from archive_lens.models import FeatureVector
from archive_lens.similarity.transport import Signature, emd
from archive_lens.utils import natural_key

logger = logging.getLogger(__name__)


class DistanceMatrix(BaseModel):
    """Symmetric photographer distances; higher means less similar."""

    photographer_ids: List[str]
    values: List[List[float]]

    @model_validator(mode="after")
    def _check(self) -> "DistanceMatrix":
        size = len(self.photographer_ids)
        matrix = np.asarray(self.values, dtype=np.float64).reshape(size, size)
        if np.any(np.diag(matrix) != 0):
            raise ValueError("distance matrix diagonal must be zero")
        if np.any(matrix < 0):
            raise ValueError("distances must be non-negative")
        if size and np.abs(matrix - matrix.T).max() > 1e-9:
            raise ValueError("distance matrix must be symmetric")
        return self

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    def _pairs(self) -> List[Tuple[float, int, int]]:
        size = len(self.photographer_ids)
        return [(self.values[i][j], i, j) for i in range(size) for j in range(i + 1, size)]

    def most_distant_pairs(self, n: int = 3) -> List[Tuple[str, str, float]]:
        ordered = sorted(self._pairs(), key=lambda t: (-t[0], t[1], t[2]))
        return [(self.photographer_ids[i], self.photographer_ids[j], d) for d, i, j in ordered[:n]]

    def least_distant_pairs(self, n: int = 3) -> List[Tuple[str, str, float]]:
        ordered = sorted(self._pairs())
        return [(self.photographer_ids[i], self.photographer_ids[j], d) for d, i, j in ordered[:n]]


def feature_dimension(features: Sequence[FeatureVector]) -> int:
    dims = {len(f.values) for f in features}
    if len(dims) != 1:
        raise InvalidInputError(f"features must share one dimension, got {sorted(dims)}")
    return dims.pop()


def build_signatures(
    features: Sequence[FeatureVector],
    signature_cap: int = DEFAULT_SIGNATURE_CAP,
    seed: int = 0,
) -> Dict[str, Signature]:
    """One uniformly weighted signature per photographer.

    Photographers with more than ``signature_cap`` features are represented
    by a seeded uniform subsample of that size.
    """
    if signature_cap < 1:
        raise InvalidInputError(f"signature_cap must be at least 1, got {signature_cap}")
    if not features:
        raise InvalidInputError("no features given")
    feature_dimension(features)

    grouped: Dict[str, List[FeatureVector]] = defaultdict(list)
    for feature in features:
        grouped[feature.photographer_id].append(feature)

    rng = np.random.default_rng(seed)
    signatures = {}
    for photographer_id in sorted(grouped, key=natural_key):
        own = sorted(grouped[photographer_id], key=lambda f: natural_key(f.photo_id))
        points = np.asarray([f.values for f in own], dtype=np.float64)
        if len(points) > signature_cap:
            keep = np.sort(rng.choice(len(points), size=signature_cap, replace=False))
            points = points[keep]
            logger.info(f"Subsampled photographer {photographer_id} from {len(own)} "
                        f"to {signature_cap} features")
        signatures[photographer_id] = Signature.uniform(points)
    return signatures


def photographer_distance_matrix(
    features: Sequence[FeatureVector],
    signature_cap: int = DEFAULT_SIGNATURE_CAP,
    seed: int = 0,
    max_workers: int = 1,
) -> DistanceMatrix:
    """Pairwise EMD between photographers' feature signatures; each pair solved once."""
    signatures = build_signatures(features, signature_cap, seed)
    ids = list(signatures)
    size = len(ids)
    pairs = [(i, j) for i in range(size) for j in range(i + 1, size)]

    def solve(pair: Tuple[int, int]) -> float:
        value, _ = emd(signatures[ids[pair[0]]], signatures[ids[pair[1]]])
        return value

    if max_workers > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            distances = list(pool.map(solve, pairs))
    else:
        distances = [solve(pair) for pair in pairs]

    matrix = np.zeros((size, size))
    for (i, j), value in zip(pairs, distances):
        matrix[i, j] = matrix[j, i] = value

    logger.info(f"Computed EMD between {len(pairs)} photographer pairs")
    return DistanceMatrix(photographer_ids=ids, values=matrix.tolist())
