"""Simulated human: weighted Euclidean similarity over the visual features."""
from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .synth_data import InsectExample, SplitDataset

log = logging.getLogger(__name__)

# Weight settings of the main VW experiments, ordered by task alignment.
TABLE1_WEIGHTS = (
    (0, 0, 1, 1),
    (1, 0, 1, 1),
    (0, 1, 1, 1),
    (1, 256, 256, 256),
    (256, 1, 256, 256),
    (1, 1, 1, 1),
)


@dataclass(frozen=True)
class SimilarityOracle:
    weights: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        if len(w) != 4:
            raise ValueError(f"need 4 weights, got {len(w)}")
        if min(w) < 0 or max(w) <= 0 or not np.all(np.isfinite(w)):
            raise ValueError(f"weights must be finite, nonnegative and not all zero: {w}")
        object.__setattr__(self, "weights", w)

    @property
    def sqrt_weights(self) -> np.ndarray:
        return np.sqrt(np.asarray(self.weights))

    def warp(self, features) -> np.ndarray:
        """Map features so plain Euclidean distance equals the oracle distance."""
        return np.asarray(features, float) * self.sqrt_weights

    def pairwise(self, a, b) -> np.ndarray:
        """Distance matrix between the rows of ``a`` and ``b``."""
        return cdist(self.warp(np.atleast_2d(a)), self.warp(np.atleast_2d(b)))

    def rowwise(self, a, b) -> np.ndarray:
        """Distance between matching rows of ``a`` and ``b``."""
        diff = np.asarray(a, float) - np.asarray(b, float)
        return np.sqrt((diff * diff * np.asarray(self.weights)).sum(-1))

    def __str__(self):
        return ",".join(f"{w:g}" for w in self.weights)


def parse_weights(text: str) -> SimilarityOracle:
    """Parse ``"1,256,256,256"`` into an oracle."""
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise ValueError(f"weights must be comma-separated numbers, got {text!r}") from None
    return SimilarityOracle(tuple(values))


def _features(x):
    return x.features if isinstance(x, InsectExample) else np.asarray(x, float)


def human_distance(a, b, o: SimilarityOracle) -> float:
    """sqrt(sum_i w_i (a_i - b_i)^2)."""
    return float(o.rowwise(_features(a), _features(b)))


def judge_triplet(ref, c1, c2, o: SimilarityOracle) -> tuple[int, bool]:
    """Pick the candidate closer to ``ref``.

    Returns ``(choice, tie)`` where ``choice`` is 0 for ``c1`` and 1 for
    ``c2``. Exact ties go to ``c1`` with ``tie=True``.
    """
    d1 = human_distance(ref, c1, o)
    d2 = human_distance(ref, c2, o)
    if d1 == d2:
        log.debug("triplet tie at distance %g", d1)
        return 0, True
    return (0, False) if d1 < d2 else (1, False)


def judge_many(ref, c1, c2, o: SimilarityOracle) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`judge_triplet` over stacked feature rows."""
    d1 = o.rowwise(ref, c1)
    d2 = o.rowwise(ref, c2)
    return (d2 < d1).astype(np.int64), d1 == d2


def nearest_train(o: SimilarityOracle, queries, data: SplitDataset) -> np.ndarray:
    """Id of the oracle's 1-NN in the train split; ties go to the lowest id."""
    train = data.train
    d = o.pairwise(queries, train.features)
    return train.ids[np.argmin(d, axis=1)]


def task_alignment(o: SimilarityOracle, data: SplitDataset) -> float:
    """1-NN accuracy on the test split with neighbours ranked by the oracle."""
    train, test = data.train, data.test
    if len(np.unique(train.labels)) < 2:
        raise ValueError("task alignment needs both classes in the train split")
    nn = nearest_train(o, test.features, data)
    return float(np.mean(data.labels[nn] == test.labels))


def search_weights(exponent_max: int, data: SplitDataset, budget: int = 5000) -> list[tuple[tuple[float, ...], float]]:
    """Alignment of every weight vector with components in {0, 2^0, ..., 2^k}."""
    if exponent_max < 0:
        raise ValueError("exponent_max must be >= 0")
    levels = [0.0] + [2.0**e for e in range(exponent_max + 1)]
    grid = [w for w in itertools.product(levels, repeat=4) if any(w)]
    if len(grid) > budget:
        warnings.warn(f"weight search enumerates {len(grid)} vectors (budget {budget})", RuntimeWarning, stacklevel=2)
    return [(w, task_alignment(SimilarityOracle(w), data)) for w in grid]
