"""Evaluation of representations for case-based decision support.

Retrieval always searches the train split in a model's embedding space; the
synthetic agent always judges similarity on the raw visual features.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .model import ReprModel, embed, predict
from .oracle import SimilarityOracle
from .synth_data import SplitDataset
from .triplets import TripletSet

log = logging.getLogger(__name__)

METRICS = ("classification_acc", "triplet_acc", "ni_h2h", "no_h2h", "neutral_ds", "persuasive_ds", "riro_ds")


@dataclass
class EmbeddingIndex:
    """Train-split embeddings under one model, ids ascending."""

    ids: np.ndarray
    labels: np.ndarray
    embeddings: np.ndarray

    @classmethod
    def build(cls, m: ReprModel, data: SplitDataset, inputs=None) -> "EmbeddingIndex":
        X = data.features if inputs is None else inputs
        train = data.train
        return cls(train.ids, train.labels, embed(m, X[train.ids]))

    def distances(self, query_embeddings) -> np.ndarray:
        return cdist(np.atleast_2d(query_embeddings), self.embeddings)

    def _masked(self, D, classes, mode, same):
        classes = np.asarray(classes)
        in_class = self.labels[None, :] == classes[:, None]
        allowed = in_class if same else ~in_class
        if not allowed.any(axis=1).all():
            raise ValueError("no train examples of the requested class")
        if mode == "nearest":
            return self.ids[np.argmin(np.where(allowed, D, np.inf), axis=1)]
        return self.ids[np.argmax(np.where(allowed, D, -np.inf), axis=1)]

    def nearest(self, D, classes) -> np.ndarray:
        """Per-row nearest train id within ``classes[row]``; ties to lowest id."""
        return self._masked(D, classes, "nearest", True)

    def furthest(self, D, classes) -> np.ndarray:
        return self._masked(D, classes, "furthest", True)

    def nearest_outside(self, D, classes) -> np.ndarray:
        """Per-row nearest train id among classes other than ``classes[row]``."""
        return self._masked(D, classes, "nearest", False)

    def furthest_outside(self, D, classes) -> np.ndarray:
        return self._masked(D, classes, "furthest", False)


def build_index(m: ReprModel, data: SplitDataset, inputs=None) -> EmbeddingIndex:
    return EmbeddingIndex.build(m, data, inputs)


def nearest_in_class(idx: EmbeddingIndex, m: ReprModel, x, cls: int) -> int:
    """Train id closest to ``x`` in embedding space among class ``cls``."""
    D = idx.distances(embed(m, np.atleast_2d(x)))
    return int(idx.nearest(D, [cls])[0])


def furthest_in_class(idx: EmbeddingIndex, m: ReprModel, x, cls: int) -> int:
    D = idx.distances(embed(m, np.atleast_2d(x)))
    return int(idx.furthest(D, [cls])[0])


@dataclass(frozen=True)
class SyntheticAgent:
    """Decision maker that answers with the label of the most similar shown case."""

    oracle: SimilarityOracle

    def distances(self, x_features, candidate_ids, data: SplitDataset) -> np.ndarray:
        """``(n_queries, n_candidates)`` human distances."""
        cand = data.features[np.asarray(candidate_ids)]
        return self.oracle.rowwise(np.asarray(x_features)[:, None, :], cand)

    def choose(self, x_features, candidate_ids, data: SplitDataset) -> tuple[np.ndarray, np.ndarray]:
        """Column index of the chosen candidate per row, and a tie flag.

        Ties go to the first column (the lowest class index when candidates
        are listed by class).
        """
        d = self.distances(x_features, candidate_ids, data)
        choice = np.argmin(d, axis=1)
        best = d[np.arange(len(d)), choice]
        ties = (d == best[:, None]).sum(axis=1) > 1
        return choice, ties


def _inputs(data, inputs):
    return data.features if inputs is None else inputs


def classification_accuracy(m: ReprModel, data: SplitDataset, split: str = "test", inputs=None) -> float:
    part = data.subset(split)
    if len(part) == 0:
        raise ValueError(f"{split} split is empty")
    X = _inputs(data, inputs)
    return float(np.mean(predict(m, X[part.ids]) == part.labels))


def triplet_accuracy(m: ReprModel, t: TripletSet, data: SplitDataset, inputs=None) -> float:
    """Fraction of triplets with d(ref, pos) < d(ref, neg); ties are wrong."""
    if len(t) == 0:
        raise ValueError("empty triplet set")
    X = _inputs(data, inputs)
    e = embed(m, X)
    dp = np.linalg.norm(e[t.ref] - e[t.pos], axis=1)
    dn = np.linalg.norm(e[t.ref] - e[t.neg], axis=1)
    return float(np.mean(dp < dn))


def _queries(m, data, inputs, split="test"):
    X = _inputs(data, inputs)
    ids = data.subset(split).ids
    idx = build_index(m, data, inputs)
    return ids, idx, idx.distances(embed(m, X[ids])), predict(m, X[ids])


def justification(m: ReprModel, data: SplitDataset, mode: str, inputs=None, split: str = "test") -> np.ndarray:
    """NI (nearest in predicted class) or NO (nearest outside it) per query."""
    _, idx, D, yhat = _queries(m, data, inputs, split)
    if mode == "NI":
        return idx.nearest(D, yhat)
    if mode == "NO":
        return idx.nearest_outside(D, yhat)
    raise ValueError(f"mode must be NI or NO, got {mode!r}")


def h2h(mA: ReprModel, mB: ReprModel, mode: str, agent: SyntheticAgent, data: SplitDataset, inputs=None) -> float:
    """Fraction of test queries whose A-justification the agent finds closer.

    Identical candidates and exact distance ties score 0.5.
    """
    ids = data.test.ids
    a = justification(mA, data, mode, inputs)
    b = justification(mB, data, mode, inputs)
    x = data.features[ids]
    da = agent.oracle.rowwise(x, data.features[a])
    db = agent.oracle.rowwise(x, data.features[b])
    score = np.where(da < db, 1.0, 0.0)
    tie = (a == b) | (da == db)
    score[tie] = 0.5
    if tie.any():
        log.debug("h2h %s: %d tied rounds", mode, int(tie.sum()))
    return float(score.mean())


def _support_accuracy(agent, data, ids, candidates, candidate_labels, what):
    choice, ties = agent.choose(data.features[ids], candidates, data)
    answer = candidate_labels[np.arange(len(ids)), choice]
    if ties.any():
        log.debug("%s: %d agent ties", what, int(ties.sum()))
    return float(np.mean(answer == data.labels[ids]))


def neutral_support(m: ReprModel, agent: SyntheticAgent, data: SplitDataset, inputs=None) -> float:
    """Agent accuracy when shown the embedding-space nearest neighbour of each class."""
    ids, idx, D, _ = _queries(m, data, inputs)
    classes = np.unique(idx.labels)
    cands = np.stack([idx.nearest(D, np.full(len(ids), c)) for c in classes], axis=1)
    labels = np.broadcast_to(classes, cands.shape)
    return _support_accuracy(agent, data, ids, cands, labels, "neutral")


def persuasive_support(m: ReprModel, agent: SyntheticAgent, data: SplitDataset, inputs=None) -> float:
    """Agent accuracy when shown the nearest predicted-class case and the
    furthest case of the other class(es)."""
    ids, idx, D, yhat = _queries(m, data, inputs)
    near = idx.nearest(D, yhat)
    far = idx.furthest_outside(D, yhat)
    cands = np.stack([near, far], axis=1)
    labels = data.labels[cands]
    # list candidates by class index so agent ties resolve to the lower class
    swap = labels[:, 0] > labels[:, 1]
    cands[swap] = cands[swap][:, ::-1]
    labels = data.labels[cands]
    return _support_accuracy(agent, data, ids, cands, labels, "persuasive")


def riro_support(agent: SyntheticAgent, data: SplitDataset, seed: int) -> float:
    """Agent accuracy with one uniformly random train case per class."""
    rng = np.random.default_rng(seed)
    ids = data.test.ids
    train = data.train
    classes = np.unique(train.labels)
    cols = []
    for c in classes:
        pool = train.class_ids(c)
        if len(pool) == 0:
            raise ValueError(f"class {c} missing from train split")
        cols.append(pool[rng.integers(0, len(pool), size=len(ids))])
    cands = np.stack(cols, axis=1)
    labels = np.broadcast_to(classes, cands.shape)
    return _support_accuracy(agent, data, ids, cands, labels, "riro")


@dataclass
class EvalReport:
    model: str
    classification_acc: float
    triplet_acc: float
    ni_h2h: float
    no_h2h: float
    neutral_ds: float
    persuasive_ds: float
    riro_ds: float
    seed: int = 0
    config: dict = field(default_factory=dict)

    def metrics(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in METRICS}

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls(**json.loads(text))


def evaluate_model(
    name: str,
    m: ReprModel,
    agent: SyntheticAgent,
    data: SplitDataset,
    test_triplets: TripletSet,
    baseline: ReprModel | None = None,
    inputs=None,
    seed: int = 0,
    config: dict | None = None,
) -> EvalReport:
    """Every metric for one model; H2H is measured against ``baseline``
    (0.5 when no baseline is given, i.e. the model against itself)."""
    other = m if baseline is None else baseline
    return EvalReport(
        model=name,
        classification_acc=classification_accuracy(m, data, "test", inputs),
        triplet_acc=triplet_accuracy(m, test_triplets, data, inputs),
        ni_h2h=h2h(m, other, "NI", agent, data, inputs),
        no_h2h=h2h(m, other, "NO", agent, data, inputs),
        neutral_ds=neutral_support(m, agent, data, inputs),
        persuasive_ds=persuasive_support(m, agent, data, inputs),
        riro_ds=riro_support(agent, data, seed),
        seed=seed,
        config=dict(config or {}),
    )
