"""Triplet judgments ``(reference, positive, negative)`` and their variants.

Candidates always come from the train split. References come from whichever
split the set is tagged with, so evaluation triplets never leak test
references into training.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .oracle import SimilarityOracle, judge_many
from .synth_data import SPLITS, SplitDataset

VARIANTS = ("human", "human_filtered", "label_derived", "intra_class")


class TripletFormatError(ValueError):
    """Malformed triplet file."""


@dataclass(frozen=True)
class Triplet:
    ref_split: str
    ref_id: int
    pos_id: int
    neg_id: int
    tie: bool = False


@dataclass
class TripletSet:
    """Column-oriented triplet collection.

    ``ref``, ``pos`` and ``neg`` hold example ids; ``tie`` marks triplets the
    oracle could not order.
    """

    ref: np.ndarray
    pos: np.ndarray
    neg: np.ndarray
    tie: np.ndarray
    variant: str = "human"
    split_tag: str = "train"
    oracle_weights: tuple[float, ...] | None = None
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.ref = np.asarray(self.ref, dtype=np.int64).reshape(-1)
        self.pos = np.asarray(self.pos, dtype=np.int64).reshape(-1)
        self.neg = np.asarray(self.neg, dtype=np.int64).reshape(-1)
        self.tie = np.asarray(self.tie, dtype=bool).reshape(-1)
        if not len(self.ref) == len(self.pos) == len(self.neg) == len(self.tie):
            raise ValueError("triplet columns differ in length")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.split_tag not in SPLITS:
            raise ValueError(f"unknown split {self.split_tag!r}")
        if np.any(self.pos == self.neg):
            raise ValueError("positive and negative must differ")

    def __len__(self):
        return len(self.ref)

    def __getitem__(self, i) -> Triplet:
        return Triplet(self.split_tag, int(self.ref[i]), int(self.pos[i]), int(self.neg[i]), bool(self.tie[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def __eq__(self, other):
        if not isinstance(other, TripletSet):
            return NotImplemented
        return (
            self.variant == other.variant
            and self.split_tag == other.split_tag
            and self.oracle_weights == other.oracle_weights
            and self.seed == other.seed
            and np.array_equal(self.ref, other.ref)
            and np.array_equal(self.pos, other.pos)
            and np.array_equal(self.neg, other.neg)
            and np.array_equal(self.tie, other.tie)
        )

    def take(self, idx, **changes) -> "TripletSet":
        idx = np.asarray(idx)
        kw = dict(
            variant=self.variant,
            split_tag=self.split_tag,
            oracle_weights=self.oracle_weights,
            seed=self.seed,
        )
        kw.update(changes)
        return TripletSet(self.ref[idx], self.pos[idx], self.neg[idx], self.tie[idx], **kw)

    def head(self, n: int) -> "TripletSet":
        return self.take(np.arange(min(n, len(self))))

    def check_against(self, data: SplitDataset) -> None:
        """Raise if the set violates its invariants on ``data``."""
        train = data.split == 0
        if len(self) == 0:
            return
        if not (train[self.pos].all() and train[self.neg].all()):
            raise ValueError("candidates must come from the train split")
        if not np.all(data.split[self.ref] == SPLITS.index(self.split_tag)):
            raise ValueError(f"references must come from the {self.split_tag} split")
        if self.split_tag == "train" and np.any((self.ref == self.pos) | (self.ref == self.neg)):
            raise ValueError("a train reference cannot be its own candidate")
        y = data.labels
        if self.variant == "intra_class" and np.any(y[self.pos] != y[self.neg]):
            raise ValueError("intra-class triplets need same-class candidates")
        if self.variant == "label_derived" and np.any((y[self.ref] != y[self.pos]) | (y[self.ref] == y[self.neg])):
            raise ValueError("label-derived triplets need label(ref)=label(pos)!=label(neg)")
        if self.variant == "human_filtered" and np.any(inconsistent_mask(self, data)):
            raise ValueError("filtered set still holds classification-inconsistent triplets")


def _references(data: SplitDataset, ref_split: str, n: int, rng) -> np.ndarray:
    pool = data.subset(ref_split).ids
    if len(pool) == 0:
        raise ValueError(f"{ref_split} split is empty")
    return pool[rng.integers(0, len(pool), size=n)]


def _candidate_pairs(pool: np.ndarray, exclude: np.ndarray | None, rng) -> tuple[np.ndarray, np.ndarray]:
    """Two distinct draws from ``pool`` per row, avoiding ``exclude`` when given.

    ``exclude`` holds positions into ``pool`` (or -1 for nothing to avoid).
    """
    n = len(exclude)
    m = len(pool)
    skip = exclude >= 0
    a = rng.integers(0, m - skip, size=n)
    a = np.where(skip & (a >= exclude), a + 1, a)
    b = rng.integers(0, m - 1 - skip, size=n)
    lo = np.where(skip, np.minimum(a, exclude), a)
    hi = np.where(skip, np.maximum(a, exclude), a)
    b = np.where(b >= lo, b + 1, b)
    b = np.where(skip & (b >= hi), b + 1, b)
    return pool[a], pool[b]


def _order(data, ref, c1, c2, o: SimilarityOracle):
    choice, tie = judge_many(data.features[ref], data.features[c1], data.features[c2], o)
    pos = np.where(choice == 0, c1, c2)
    neg = np.where(choice == 0, c2, c1)
    return pos, neg, tie


def sample_and_label(
    data: SplitDataset, n: int, ref_split: str, o: SimilarityOracle, seed: int
) -> TripletSet:
    """Draw ``n`` random triplets and let the oracle order the candidates."""
    if n <= 0:
        raise ValueError("n must be positive")
    pool = data.train.ids
    if len(pool) < 3:
        raise ValueError("need at least 3 train examples")
    rng = np.random.default_rng(seed)
    ref = _references(data, ref_split, n, rng)
    if ref_split == "train":
        exclude = np.searchsorted(pool, ref)
    else:
        exclude = np.full(n, -1)
    c1, c2 = _candidate_pairs(pool, exclude, rng)
    pos, neg, tie = _order(data, ref, c1, c2, o)
    return TripletSet(ref, pos, neg, tie, "human", ref_split, o.weights, seed)


def inconsistent_mask(t: TripletSet, data: SplitDataset) -> np.ndarray:
    """True where the judged-closer candidate is from the wrong class and the
    other candidate shares the reference's class."""
    y = data.labels
    return (y[t.pos] != y[t.ref]) & (y[t.neg] == y[t.ref])


def filter_inconsistent(t: TripletSet, data: SplitDataset) -> TripletSet:
    if t.variant not in ("human", "human_filtered"):
        raise ValueError(f"only human triplets can be filtered, got {t.variant}")
    keep = np.flatnonzero(~inconsistent_mask(t, data))
    return t.take(keep, variant="human_filtered")


def derive_label_triplets(data: SplitDataset, n: int, seed: int, ref_split: str = "train") -> TripletSet:
    """Triplets built from labels alone: positive shares the reference's class."""
    train = data.train
    classes = np.unique(train.labels)
    if len(classes) < 2:
        raise ValueError("label-derived triplets need both classes in the train split")
    rng = np.random.default_rng(seed)
    ref = _references(data, ref_split, n, rng)
    y_ref = data.labels[ref]
    pos = np.empty(n, dtype=np.int64)
    neg = np.empty(n, dtype=np.int64)
    for c in classes:
        same = train.class_ids(c)
        other = train.ids[train.labels != c]
        rows = np.flatnonzero(y_ref == c)
        if ref_split == "train":
            # skip the reference itself among same-class positives
            at = np.searchsorted(same, ref[rows])
            draw = rng.integers(0, len(same) - 1, size=len(rows))
            pos[rows] = same[np.where(draw >= at, draw + 1, draw)]
        else:
            pos[rows] = same[rng.integers(0, len(same), size=len(rows))]
        neg[rows] = other[rng.integers(0, len(other), size=len(rows))]
    return TripletSet(ref, pos, neg, np.zeros(n, bool), "label_derived", ref_split, None, seed)


def sample_intraclass(
    data: SplitDataset, n: int, o: SimilarityOracle, seed: int, ref_split: str = "train"
) -> TripletSet:
    """Oracle-ordered triplets whose two candidates share a class."""
    train = data.train
    classes = np.unique(train.labels)
    by_class = [train.class_ids(c) for c in classes]
    if len(classes) < 2 or min(len(ids) for ids in by_class) < 2:
        raise ValueError("each class needs at least 2 train examples")
    if ref_split == "train" and min(len(ids) for ids in by_class) < 3:
        raise ValueError("train references need at least 3 train examples per class")
    rng = np.random.default_rng(seed)
    ref = _references(data, ref_split, n, rng)
    pick = rng.integers(0, len(classes), size=n)
    c1 = np.empty(n, dtype=np.int64)
    c2 = np.empty(n, dtype=np.int64)
    for k, pool in enumerate(by_class):
        rows = np.flatnonzero(pick == k)
        if ref_split == "train":
            pos_in = np.searchsorted(pool, ref[rows])
            present = (pos_in < len(pool)) & (pool[np.minimum(pos_in, len(pool) - 1)] == ref[rows])
            exclude = np.where(present, pos_in, -1)
        else:
            exclude = np.full(len(rows), -1)
        c1[rows], c2[rows] = _candidate_pairs(pool, exclude, rng)
    pos, neg, tie = _order(data, ref, c1, c2, o)
    return TripletSet(ref, pos, neg, tie, "intra_class", ref_split, o.weights, seed)


def _format_weights(w):
    return "none" if w is None else ",".join(f"{v:g}" for v in w)


def save(t: TripletSet, path) -> None:
    """Write ``# variant=.. weights=.. seed=..`` then one CSV row per triplet."""
    seed = "none" if t.seed is None else t.seed
    lines = [f"# variant={t.variant} weights={_format_weights(t.oracle_weights)} seed={seed} split={t.split_tag}"]
    lines += [f"{t.split_tag},{r},{p},{n},{int(k)}" for r, p, n, k in zip(t.ref, t.pos, t.neg, t.tie)]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load(path) -> TripletSet:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise TripletFormatError(f"{path}:1: missing '# variant=...' header")
    header = {}
    for tok in lines[0][1:].split():
        key, sep, value = tok.partition("=")
        if not sep:
            raise TripletFormatError(f"{path}:1: bad header field {tok!r}")
        header[key] = value
    variant = header.get("variant")
    if variant not in VARIANTS:
        raise TripletFormatError(f"{path}:1: unknown variant {variant!r}")
    w = header.get("weights", "none")
    try:
        weights = None if w == "none" else tuple(float(v) for v in w.split(","))
        seed = None if header.get("seed", "none") == "none" else int(header["seed"])
    except ValueError:
        raise TripletFormatError(f"{path}:1: bad weights or seed") from None
    split_tag = header.get("split", "train")

    cols = ([], [], [], [])
    first = True
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise TripletFormatError(f"{path}:{lineno}: expected 5 fields, got {len(parts)}")
        try:
            row_split = parts[0]
            r, p, n, tie = (int(v) for v in parts[1:])
        except ValueError:
            raise TripletFormatError(f"{path}:{lineno}: non-integer field") from None
        if row_split not in SPLITS:
            raise TripletFormatError(f"{path}:{lineno}: unknown split {row_split!r}")
        if first:
            split_tag, first = row_split, False
        if row_split != split_tag:
            raise TripletFormatError(f"{path}:{lineno}: mixed reference splits")
        if p == n:
            raise TripletFormatError(f"{path}:{lineno}: pos_id equals neg_id")
        if tie not in (0, 1):
            raise TripletFormatError(f"{path}:{lineno}: tie must be 0 or 1")
        for col, v in zip(cols, (r, p, n, tie)):
            col.append(v)
    return TripletSet(*cols, variant=variant, split_tag=split_tag, oracle_weights=weights, seed=seed)
