"""Vespula-vs-Weevil (VW) synthetic insects.

Each insect has four visual features in [0, 1]: head size, body size, tail
length and texture. Only head and body decide the label; tail and texture are
distractors. Labels come from a :class:`Square` region ("mid-sized head and
mid-sized body" is a Weevil) or a :class:`Linear` separator.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Union

import numpy as np

VESPULA = 0
WEEVIL = 1
CLASS_NAMES = ("Vespula", "Weevil")
FEATURES = ("head", "body", "tail", "texture")
SPLITS = ("train", "val", "test")

CSV_HEADER = ["id", *FEATURES, "label", "split"]


class DegenerateDatasetWarning(UserWarning):
    """A split ended up with a single class."""


@dataclass(frozen=True)
class Square:
    """Weevil iff both head and body lie in ``[lo, hi]``."""

    lo: float = 0.35
    hi: float = 0.65

    def __post_init__(self):
        if not 0.0 <= self.lo < self.hi <= 1.0:
            raise ValueError(f"Square boundary needs 0 <= lo < hi <= 1, got lo={self.lo}, hi={self.hi}")

    def label(self, head, body):
        head, body = np.asarray(head), np.asarray(body)
        inside = (head >= self.lo) & (head <= self.hi) & (body >= self.lo) & (body <= self.hi)
        return inside.astype(np.int64)

    def distance(self, head, body):
        """Euclidean distance to the square's outline in the head/body plane."""
        head, body = np.asarray(head, float), np.asarray(body, float)
        inner = np.minimum.reduce([head - self.lo, self.hi - head, body - self.lo, self.hi - body])
        dx = np.maximum.reduce([self.lo - head, np.zeros_like(head), head - self.hi])
        dy = np.maximum.reduce([self.lo - body, np.zeros_like(body), body - self.hi])
        return np.where(inner >= 0, inner, np.hypot(dx, dy))


@dataclass(frozen=True)
class Linear:
    """Weevil iff ``w_head * head + w_body * body >= offset``."""

    w_head: float = 1.0
    w_body: float = 1.0
    offset: float = 1.0

    def __post_init__(self):
        if self.w_head == 0 and self.w_body == 0:
            raise ValueError("Linear boundary needs a nonzero normal vector")

    def label(self, head, body):
        score = self.w_head * np.asarray(head) + self.w_body * np.asarray(body)
        return (score >= self.offset).astype(np.int64)

    def distance(self, head, body):
        score = self.w_head * np.asarray(head, float) + self.w_body * np.asarray(body, float)
        return np.abs(score - self.offset) / np.hypot(self.w_head, self.w_body)


DecisionBoundary = Union[Square, Linear]


def boundary_to_dict(boundary: DecisionBoundary) -> dict:
    if isinstance(boundary, Square):
        return {"kind": "square", "lo": boundary.lo, "hi": boundary.hi}
    return {"kind": "linear", "w_head": boundary.w_head, "w_body": boundary.w_body, "offset": boundary.offset}


def boundary_from_dict(d: dict) -> DecisionBoundary:
    d = dict(d)
    kind = d.pop("kind", "square")
    if kind == "square":
        return Square(**d)
    if kind == "linear":
        return Linear(**d)
    raise ValueError(f"unknown boundary kind {kind!r}")


def assign_label(head: float, body: float, boundary: DecisionBoundary) -> int:
    """Groundtruth label of one insect."""
    return int(boundary.label(head, body))


@dataclass(frozen=True)
class InsectExample:
    id: int
    head: float
    body: float
    tail: float
    texture: float
    label: int

    @property
    def features(self) -> np.ndarray:
        return np.array([self.head, self.body, self.tail, self.texture])


@dataclass(frozen=True)
class Split:
    """Read-only view on one split: ids are sorted ascending."""

    name: str
    ids: np.ndarray
    features: np.ndarray
    labels: np.ndarray

    def __len__(self):
        return len(self.ids)

    def class_ids(self, label: int) -> np.ndarray:
        return self.ids[self.labels == label]


@dataclass
class SplitDataset:
    """The full dataset, indexed by example id (row ``i`` is id ``i``)."""

    features: np.ndarray
    labels: np.ndarray
    split: np.ndarray  # 0=train, 1=val, 2=test
    boundary: DecisionBoundary = field(default_factory=Square)
    seed: int = 0

    def __post_init__(self):
        self._views = {}

    def __len__(self):
        return len(self.labels)

    def subset(self, name: str) -> Split:
        if name not in self._views:
            code = SPLITS.index(name)
            ids = np.flatnonzero(self.split == code)
            self._views[name] = Split(name, ids, self.features[ids], self.labels[ids])
        return self._views[name]

    @property
    def train(self) -> Split:
        return self.subset("train")

    @property
    def val(self) -> Split:
        return self.subset("val")

    @property
    def test(self) -> Split:
        return self.subset("test")

    def example(self, i: int) -> InsectExample:
        return InsectExample(int(i), *map(float, self.features[i]), int(self.labels[i]))

    def examples(self, name: str) -> list[InsectExample]:
        return [self.example(i) for i in self.subset(name).ids]

    def relabel(self) -> "SplitDataset":
        labels = self.boundary.label(self.features[:, 0], self.features[:, 1])
        return SplitDataset(self.features.copy(), labels, self.split.copy(), self.boundary, self.seed)


def split_sizes(n: int, ratios=(0.6, 0.2, 0.2)) -> tuple[int, int, int]:
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or min(ratios) <= 0 or not np.isclose(sum(ratios), 1.0):
        raise ValueError(f"ratios must be three positive numbers summing to 1, got {ratios}")
    n_train = int(round(n * ratios[0]))
    n_val = int(round(n * ratios[1]))
    n_val = min(n_val, n - n_train)
    return n_train, n_val, n - n_train - n_val


def _sample_features(n, boundary, rng, balance, margin, max_draws=10_000_000):
    if not balance and margin <= 0:
        x = rng.random((n, 4))
        return x, boundary.label(x[:, 0], x[:, 1])

    quota = [n // 2, n - n // 2] if balance else None
    kept, drawn = [], 0
    counts = [0, 0]
    total = 0
    while total < n:
        if drawn > max_draws:
            raise ValueError("could not fill the requested classes; boundary region too small for this margin")
        chunk = rng.random((max(4 * n, 256), 4))
        drawn += len(chunk)
        y = boundary.label(chunk[:, 0], chunk[:, 1])
        ok = boundary.distance(chunk[:, 0], chunk[:, 1]) >= margin if margin > 0 else np.ones(len(chunk), bool)
        for x_row, y_row in zip(chunk[ok], y[ok]):
            if quota is not None:
                if counts[y_row] >= quota[y_row]:
                    continue
                counts[y_row] += 1
            kept.append(x_row)
            total += 1
            if total == n:
                break
    x = np.array(kept)
    return x, boundary.label(x[:, 0], x[:, 1])


def generate_dataset(
    n: int = 2000,
    boundary: DecisionBoundary | None = None,
    ratios=(0.6, 0.2, 0.2),
    seed: int = 0,
    balance: bool = False,
    margin: float = 0.0,
) -> SplitDataset:
    """Sample ``n`` insects uniformly on the unit hypercube and split them.

    Args:
        n: number of insects.
        boundary: labelling rule, defaults to ``Square(0.35, 0.65)``.
        ratios: train/val/test fractions.
        seed: RNG seed; identical arguments give identical datasets.
        balance: rejection-sample so both classes have ``n/2`` members.
        margin: reject insects closer than this to the boundary in the
            head/body plane.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    boundary = boundary if boundary is not None else Square()
    sizes = split_sizes(n, ratios)
    rng = np.random.default_rng(seed)
    x, y = _sample_features(n, boundary, rng, balance, margin)
    split = np.empty(n, dtype=np.int64)
    perm = rng.permutation(n)
    split[perm[: sizes[0]]] = 0
    split[perm[sizes[0] : sizes[0] + sizes[1]]] = 1
    split[perm[sizes[0] + sizes[1] :]] = 2
    data = SplitDataset(x, y, split, boundary, seed)
    if len(np.unique(data.train.labels)) < 2:
        warnings.warn("train split contains a single class", DegenerateDatasetWarning, stacklevel=2)
    return data


@dataclass(frozen=True)
class LiftConfig:
    """Fixed random nonlinear lift of the 4 features to ``dim`` dimensions."""

    dim: int = 32
    noise: float = 0.0
    seed: int = 0
    scale: float = 2.0

    def matrices(self) -> tuple[np.ndarray, np.ndarray]:
        rng = np.random.default_rng([self.seed, 0])
        A = rng.normal(0.0, self.scale, size=(self.dim, 4))
        # centre the pre-activations on the middle of the feature cube
        b = -A @ np.full(4, 0.5) + rng.normal(0.0, 0.1, size=self.dim)
        return A, b


def lift_features(x, lift: LiftConfig | None = None, ids=None) -> np.ndarray:
    """Model input for one insect (or a stack of feature rows).

    Without a lift the raw features are returned. With one, the features go
    through ``tanh(A x + b)`` plus per-example noise keyed on ``ids``.
    """
    if isinstance(x, InsectExample):
        ids = x.id if ids is None else ids
        x = x.features
    x = np.asarray(x, dtype=float)
    if lift is None:
        return x.copy()
    A, b = lift.matrices()
    out = np.tanh(x @ A.T + b)
    if lift.noise > 0:
        if ids is None:
            raise ValueError("noisy lifting needs example ids")
        id_list = np.atleast_1d(ids)
        eps = np.stack([np.random.default_rng([lift.seed, 1, int(i)]).normal(0.0, lift.noise, lift.dim) for i in id_list])
        out = out + (eps if out.ndim == 2 else eps[0])
    return out


def model_inputs(data: SplitDataset, lift: LiftConfig | None = None) -> np.ndarray:
    """Inputs for every example, row ``i`` belonging to id ``i``."""
    return lift_features(data.features, lift, ids=np.arange(len(data)))


def save_csv(data: SplitDataset, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for i in range(len(data)):
            w.writerow([i, *(f"{v:.9g}" for v in data.features[i]), int(data.labels[i]), SPLITS[data.split[i]]])


def load_csv(path, boundary: DecisionBoundary | None = None, seed: int = 0) -> SplitDataset:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                rows.append((int(row[0]), [float(v) for v in row[1:5]], int(row[5]), SPLITS.index(row[6])))
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed row {row!r}") from exc
    rows.sort(key=lambda r: r[0])
    if [r[0] for r in rows] != list(range(len(rows))):
        raise ValueError(f"{path}: ids must be 0..n-1")
    features = np.array([r[1] for r in rows]).reshape(-1, 4)
    return SplitDataset(
        features,
        np.array([r[2] for r in rows], dtype=np.int64),
        np.array([r[3] for r in rows], dtype=np.int64),
        boundary if boundary is not None else Square(),
        seed,
    )

