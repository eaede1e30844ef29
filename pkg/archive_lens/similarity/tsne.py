"""Exact t-SNE for embedding photo features in two dimensions."""

import logging
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from archive_lens.errors import InvalidInputError
from archive_lens.models import FeatureVector

logger = logging.getLogger(__name__)

MIN_GAIN = 0.01
PROBABILITY_FLOOR = 1e-12


class EmbeddingConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    perplexity: float = Field(default=30.0, gt=0)
    iterations: int = Field(default=1000, gt=0)
    learning_rate: float = Field(default=200.0, gt=0)
    early_exaggeration: float = Field(default=12.0, gt=0)
    exaggeration_iterations: int = Field(default=250, ge=0)
    initial_momentum: float = 0.5
    final_momentum: float = 0.8
    kl_check_every: int = Field(default=50, gt=0)
    seed: int = 0


class EmbeddingResult(BaseModel):
    """2-D coordinates per photo and the KL divergence trace."""

    photo_ids: List[str]
    photographer_ids: List[str]
    coordinates: List[Tuple[float, float]]
    kl_history: List[Tuple[int, float]]


class TSNE:
    """t-SNE with Gaussian input affinities and a Student-t output kernel."""

    def __init__(self, config: Optional[EmbeddingConfig] = None):
        self.config = config or EmbeddingConfig()
        self.kl_history_: List[Tuple[int, float]] = []

    @staticmethod
    def pairwise_distances(X: np.ndarray) -> np.ndarray:
        """Squared Euclidean distances between all rows."""
        diff = X[:, None, :] - X[None, :, :]
        return np.sum(diff * diff, axis=2)

    @staticmethod
    def _entropy(distances: np.ndarray, beta: float) -> Tuple[float, np.ndarray]:
        shifted = distances - distances.min()
        p = np.exp(-shifted * beta)
        total = p.sum()
        entropy = np.log(total) + beta * np.sum(shifted * p) / total
        return entropy, p / total

    def conditional_probabilities(self, distances: np.ndarray, tol: float = 1e-4,
                                  max_tries: int = 100) -> np.ndarray:
        """Row-wise p_j|i with each bandwidth found by bisection on the entropy."""
        n = distances.shape[0]
        target = np.log(self.config.perplexity)
        P = np.zeros((n, n))
        for i in range(n):
            others = np.concatenate([distances[i, :i], distances[i, i + 1:]])
            beta, beta_min, beta_max = 1.0, -np.inf, np.inf
            entropy, row = self._entropy(others, beta)
            tries = 0
            while abs(entropy - target) > tol and tries < max_tries:
                if entropy > target:
                    beta_min = beta
                    beta = beta * 2.0 if beta_max == np.inf else (beta + beta_max) / 2.0
                else:
                    beta_max = beta
                    beta = beta / 2.0 if beta_min == -np.inf else (beta + beta_min) / 2.0
                entropy, row = self._entropy(others, beta)
                tries += 1
            P[i, :i] = row[:i]
            P[i, i + 1:] = row[i:]
        return P

    def joint_probabilities(self, X: np.ndarray) -> np.ndarray:
        conditional = self.conditional_probabilities(self.pairwise_distances(X))
        P = (conditional + conditional.T) / (2.0 * X.shape[0])
        return np.maximum(P, PROBABILITY_FLOOR)

    def _affinities(self, Y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        num = 1.0 / (1.0 + self.pairwise_distances(Y))
        np.fill_diagonal(num, 0.0)
        Q = np.maximum(num / num.sum(), PROBABILITY_FLOOR)
        return num, Q

    @staticmethod
    def kl_divergence(P: np.ndarray, Q: np.ndarray) -> float:
        mask = ~np.eye(P.shape[0], dtype=bool)
        return float(np.sum(P[mask] * np.log(P[mask] / Q[mask])))

    @staticmethod
    def gradient(P: np.ndarray, Q: np.ndarray, num: np.ndarray, Y: np.ndarray) -> np.ndarray:
        weighted = (P - Q) * num
        return 4.0 * (weighted.sum(axis=1)[:, None] * Y - weighted @ Y)

    def _validate(self, X: np.ndarray) -> None:
        n = X.shape[0]
        if X.ndim != 2 or n < 4:
            raise InvalidInputError(f"t-SNE needs at least 4 points, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise InvalidInputError("t-SNE input must be finite")
        if self.config.perplexity >= (n - 1) / 3.0:
            raise InvalidInputError(
                f"perplexity {self.config.perplexity} too large for {n} points "
                f"(must be below {(n - 1) / 3.0:.3g})"
            )

    def fit_transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        self._validate(X)
        cfg = self.config
        n = X.shape[0]

        P = self.joint_probabilities(X)
        rng = np.random.default_rng(cfg.seed)
        Y = rng.normal(0.0, 1e-4, size=(n, 2))
        velocity = np.zeros_like(Y)
        gains = np.ones_like(Y)
        self.kl_history_ = []

        for iteration in range(cfg.iterations):
            exaggerated = iteration < cfg.exaggeration_iterations
            P_used = P * cfg.early_exaggeration if exaggerated else P
            momentum = cfg.initial_momentum if exaggerated else cfg.final_momentum

            num, Q = self._affinities(Y)
            grad = self.gradient(P_used, Q, num, Y)

            same_sign = (grad > 0) == (velocity > 0)
            gains = np.where(same_sign, gains * 0.8, gains + 0.2)
            gains = np.maximum(gains, MIN_GAIN)
            velocity = momentum * velocity - cfg.learning_rate * gains * grad
            Y = Y + velocity
            Y = Y - Y.mean(axis=0)

            if (iteration + 1) % cfg.kl_check_every == 0:
                _, Q = self._affinities(Y)
                kl = self.kl_divergence(P, Q)
                self.kl_history_.append((iteration + 1, kl))
                logger.debug(f"t-SNE iteration {iteration + 1}: KL = {kl:.6f}")

        if self.kl_history_:
            logger.info(f"t-SNE finished {cfg.iterations} iterations, final KL "
                        f"{self.kl_history_[-1][1]:.6f}")
        return Y


def tsne_embed(
    features: Union[Sequence[FeatureVector], np.ndarray],
    config: Optional[EmbeddingConfig] = None,
) -> np.ndarray:
    """N x 2 embedding of feature vectors (or a raw N x D array)."""
    if isinstance(features, np.ndarray):
        X = features
    else:
        X = np.asarray([f.values for f in features], dtype=np.float64)
    return TSNE(config).fit_transform(X)


def embed_features(features: Sequence[FeatureVector], config: Optional[EmbeddingConfig] = None) -> EmbeddingResult:
    """Embed features and keep photo/photographer ids alongside the coordinates."""
    model = TSNE(config)
    coordinates = model.fit_transform(np.asarray([f.values for f in features], dtype=np.float64))
    return EmbeddingResult(
        photo_ids=[f.photo_id for f in features],
        photographer_ids=[f.photographer_id for f in features],
        coordinates=[(float(x), float(y)) for x, y in coordinates],
        kl_history=model.kl_history_,
    )
