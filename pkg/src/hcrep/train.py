"""Joint cross-entropy + triplet-margin training.

The objective per optimizer step is

    lam * mean_CE(class batch) + (1 - lam) * mean_hinge(triplet batch)

with hinge ``max(d(r, +) - d(r, -) + margin, 0)`` on Euclidean embedding
distances. ``lam=1`` never reads triplets; ``lam=0`` never touches the
classifier head.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .model import ReprModel, fit_centroids, log_softmax, softmax
from .synth_data import SplitDataset
from .triplets import TripletSet

log = logging.getLogger(__name__)

HISTORY_COLUMNS = ["epoch", "train_ce", "train_tml", "train_total", "val_ce", "val_tml", "val_total"]


class DivergenceError(FloatingPointError):
    """Loss or gradient became NaN/Inf."""


@dataclass(frozen=True)
class TrainConfig:
    lam: float = 0.5
    margin: float = 1.0
    lr: float = 1e-4
    triplet_batch: int = 40
    class_batch: int = 30
    epochs: int = 50
    seed: int = 0
    # None: one pass over the longer active stream
    steps_per_epoch: int | None = None
    prob_floor: float = 1e-12

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lam must be in [0, 1], got {self.lam}")
        if self.margin <= 0:
            raise ValueError("margin must be positive")
        if self.triplet_batch < 1 or self.class_batch < 1 or self.epochs < 1:
            raise ValueError("batch sizes and epochs must be >= 1")
        if self.steps_per_epoch is not None and self.steps_per_epoch < 1:
            raise ValueError("steps_per_epoch must be >= 1")

    @property
    def uses_classes(self) -> bool:
        return self.lam > 0

    @property
    def uses_triplets(self) -> bool:
        return self.lam < 1


@dataclass
class OptimizerState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(state: OptimizerState, params: dict, grads: dict, lr: float) -> tuple[dict, OptimizerState]:
    """Bias-corrected Adam update, applied in place."""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**state.step
    bc2 = 1.0 - b2**state.step
    for k, g in grads.items():
        if k not in state.m:
            state.m[k] = np.zeros_like(params[k])
            state.v[k] = np.zeros_like(params[k])
        m, v = state.m[k], state.v[k]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        params[k] -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


def _ce_from_logits(logits, y, floor):
    nll = -log_softmax(logits)[np.arange(len(y)), y]
    return np.minimum(nll, -math.log(floor))


def cross_entropy_loss(m: ReprModel, x, y, prob_floor: float = 1e-12) -> float:
    """Mean negative log-likelihood with probabilities floored at ``prob_floor``."""
    logits = m.forward(np.asarray(x, float))[1]
    return float(_ce_from_logits(logits, np.asarray(y), prob_floor).mean())


def _hinge_terms(er, ep, en, margin):
    dp_vec, dn_vec = er - ep, er - en
    dp = np.sqrt((dp_vec * dp_vec).sum(1))
    dn = np.sqrt((dn_vec * dn_vec).sum(1))
    return dp_vec, dn_vec, dp, dn, dp - dn + margin


def triplet_margin_loss(m: ReprModel, x_ref, x_pos, x_neg, margin: float = 1.0) -> float:
    """Mean of ``max(d(r, +) - d(r, -) + margin, 0)``."""
    e = m.forward(np.concatenate([x_ref, x_pos, x_neg]))[0]
    er, ep, en = np.split(e, 3)
    return float(np.maximum(_hinge_terms(er, ep, en, margin)[-1], 0.0).mean())


def total_loss(ce: float, tml: float, lam: float) -> float:
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must be in [0, 1]")
    return lam * ce + (1.0 - lam) * tml


def _unit(vec, norm):
    out = np.zeros_like(vec)
    nz = norm > 0
    out[nz] = vec[nz] / norm[nz, None]
    return out


def loss_and_grads(
    m: ReprModel,
    x_cls=None,
    y_cls=None,
    x_ref=None,
    x_pos=None,
    x_neg=None,
    lam: float = 0.5,
    margin: float = 1.0,
    prob_floor: float = 1e-12,
) -> tuple[float, float, float, dict[str, np.ndarray]]:
    """Exact gradient of the joint objective on one pair of batches.

    Returns ``(ce, tml, total, grads)``. A term whose weight is zero is
    neither evaluated nor differentiated, so its batch may be ``None``.
    Inactive triplets and triplets exactly at the hinge contribute nothing.
    """
    blocks = []
    use_cls = lam > 0 and x_cls is not None and len(x_cls) > 0
    use_trip = lam < 1 and x_ref is not None and len(x_ref) > 0
    if use_cls:
        blocks.append(np.asarray(x_cls, float))
    if use_trip:
        blocks += [np.asarray(x_ref, float), np.asarray(x_pos, float), np.asarray(x_neg, float)]
    if not blocks:
        raise ValueError("nothing to train on: both loss terms are disabled or empty")
    e, logits, acts = m.forward(np.concatenate(blocks))

    d_embed = np.zeros_like(e)
    d_logits = None
    ce = tml = 0.0
    offset = 0
    if use_cls:
        nc = len(x_cls)
        y = np.asarray(y_cls)
        nll = -log_softmax(logits[:nc])[np.arange(nc), y]
        ce = float(np.minimum(nll, -math.log(prob_floor)).mean())
        d_logits = np.zeros_like(logits)
        g = softmax(logits[:nc])
        g[np.arange(nc), y] -= 1.0
        g[nll > -math.log(prob_floor)] = 0.0
        d_logits[:nc] = lam * g / nc
        offset = nc
    if use_trip:
        nt = len(x_ref)
        er = e[offset : offset + nt]
        ep = e[offset + nt : offset + 2 * nt]
        en = e[offset + 2 * nt :]
        dp_vec, dn_vec, dp, dn, slack = _hinge_terms(er, ep, en, margin)
        tml = float(np.maximum(slack, 0.0).mean())
        active = (slack > 0).astype(float)[:, None] * ((1.0 - lam) / nt)
        up = _unit(dp_vec, dp) * active
        un = _unit(dn_vec, dn) * active
        d_embed[offset : offset + nt] = up - un
        d_embed[offset + nt : offset + 2 * nt] = -up
        d_embed[offset + 2 * nt :] = un

    grads = m.backward(acts, d_embed, d_logits)
    return ce, tml, total_loss(ce, tml, lam), grads


@dataclass
class TrainHistory:
    rows: list[dict] = field(default_factory=list)
    best_epoch: int = -1
    best_val_total_loss: float = math.inf
    steps: int = 0

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=HISTORY_COLUMNS)
            w.writeheader()
            for row in self.rows:
                w.writerow({k: (f"{row[k]:.9g}" if k != "epoch" else row[k]) for k in HISTORY_COLUMNS})


class _Stream:
    """Endless minibatches of indices; reshuffles after each full pass."""

    def __init__(self, n, batch, rng):
        self.n, self.batch, self.rng = n, batch, rng
        self.order = rng.permutation(n)
        self.pos = 0

    def next(self):
        out = []
        need = min(self.batch, self.n)
        while need:
            take = min(need, self.n - self.pos)
            out.append(self.order[self.pos : self.pos + take])
            self.pos += take
            need -= take
            if self.pos == self.n:
                self.order = self.rng.permutation(self.n)
                self.pos = 0
        return np.concatenate(out)


def train(
    m: ReprModel,
    data: SplitDataset,
    triplets: TripletSet | None,
    cfg: TrainConfig,
    inputs: np.ndarray | None = None,
    val_triplets: TripletSet | None = None,
) -> tuple[ReprModel, TrainHistory]:
    """Train a copy of ``m`` and return the best-validation checkpoint.

    Args:
        m: starting model (left untouched).
        data: dataset; classification batches come from its train split.
        triplets: training triplets (ignored when ``cfg.lam == 1``).
        cfg: optimisation settings.
        inputs: model input for every example id (defaults to raw features).
        val_triplets: fixed triplet set for the validation triplet loss.
    """
    X = data.features if inputs is None else np.asarray(inputs, float)
    train_ids = data.train.ids
    if len(train_ids) == 0:
        raise ValueError("empty train split")
    if cfg.uses_triplets and (triplets is None or len(triplets) == 0):
        raise ValueError("triplet loss is enabled but no triplets were given")

    rng = np.random.default_rng(cfg.seed)
    model = m.copy()
    model.centroids = None
    state = OptimizerState()

    cls_stream = _Stream(len(train_ids), cfg.class_batch, rng) if cfg.uses_classes else None
    trip_stream = _Stream(len(triplets), cfg.triplet_batch, rng) if cfg.uses_triplets else None
    if cfg.steps_per_epoch is not None:
        steps = cfg.steps_per_epoch
    else:
        steps = max(
            math.ceil(len(train_ids) / cfg.class_batch) if cfg.uses_classes else 0,
            math.ceil(len(triplets) / cfg.triplet_batch) if cfg.uses_triplets else 0,
        )

    val = data.val
    history = TrainHistory()
    best = model.copy()
    for epoch in range(cfg.epochs):
        sums = np.zeros(3)
        for _ in range(steps):
            xc = yc = xr = xp = xn = None
            if cls_stream is not None:
                ids = train_ids[cls_stream.next()]
                xc, yc = X[ids], data.labels[ids]
            if trip_stream is not None:
                b = trip_stream.next()
                xr, xp, xn = X[triplets.ref[b]], X[triplets.pos[b]], X[triplets.neg[b]]
            # overflow is reported below as a DivergenceError
            with np.errstate(over="ignore", invalid="ignore"):
                ce, tml, tot, grads = loss_and_grads(model, xc, yc, xr, xp, xn, cfg.lam, cfg.margin, cfg.prob_floor)
            if not math.isfinite(tot) or not all(np.isfinite(g).all() for g in grads.values()):
                raise DivergenceError(
                    f"non-finite loss/gradient at epoch {epoch}, step {state.step + 1}: ce={ce}, tml={tml}"
                )
            adam_step(state, model.params, grads, cfg.lr)
            sums += (ce, tml, tot)

        v_ce, v_tml, v_tot = evaluate_losses(model, X, val.ids, data.labels, val_triplets, cfg)
        if not math.isfinite(v_tot):
            raise DivergenceError(f"non-finite validation loss at epoch {epoch}")
        tr = sums / steps
        history.rows.append(
            dict(epoch=epoch, train_ce=tr[0], train_tml=tr[1], train_total=tr[2], val_ce=v_ce, val_tml=v_tml, val_total=v_tot)
        )
        if v_tot < history.best_val_total_loss:
            history.best_val_total_loss = v_tot
            history.best_epoch = epoch
            best = model.copy()
        log.debug("epoch %d train %.4f val %.4f", epoch, tr[2], v_tot)
    history.steps = state.step

    if not cfg.uses_classes:
        best = fit_centroids(best, X[train_ids], data.labels[train_ids])
    return best, history


def evaluate_losses(m: ReprModel, X, ids, labels, triplets: TripletSet | None, cfg: TrainConfig) -> tuple[float, float, float]:
    """``(ce, tml, total)`` on the examples ``ids`` and a fixed triplet set."""
    ce = cross_entropy_loss(m, X[ids], labels[ids], cfg.prob_floor) if cfg.uses_classes and len(ids) else 0.0
    tml = 0.0
    if cfg.uses_triplets and triplets is not None and len(triplets):
        tml = triplet_margin_loss(m, X[triplets.ref], X[triplets.pos], X[triplets.neg], cfg.margin)
    return ce, tml, total_loss(ce, tml, cfg.lam)
