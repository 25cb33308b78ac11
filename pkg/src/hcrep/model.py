"""Encoder + projection head + classifier head, as plain numpy arrays.

The embedding (projection-head output) is the representation used for
nearest-neighbour retrieval; the classifier reads from it. Parameters live in
an ordered dict so the optimizer and the gradient checker can walk them.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

CHECKPOINT_FORMAT = "hcrep-checkpoint"
CHECKPOINT_VERSION = 1
N_CLASSES = 2


def _tanh(z):
    return np.tanh(z)


def _tanh_grad(a):
    return 1.0 - a * a


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_grad(a):
    return (a > 0).astype(a.dtype)


def _identity(z):
    return z


def _identity_grad(a):
    return np.ones_like(a)


# derivative expressed through the activation output
ACTIVATIONS = {
    "tanh": (_tanh, _tanh_grad),
    "relu": (_relu, _relu_grad),
    "linear": (_identity, _identity_grad),
}


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int = 4
    hidden_dims: tuple[int, ...] = (64, 64)
    embed_dim: int = 50
    activation: str = "tanh"
    projection_activation: str = "tanh"
    init_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim < 1 or self.embed_dim < 1:
            raise ValueError("input_dim and embed_dim must be >= 1")
        if not self.hidden_dims or min(self.hidden_dims) < 1:
            raise ValueError("hidden_dims must be a nonempty list of positive widths")
        for act in (self.activation, self.projection_activation):
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}; choose from {sorted(ACTIVATIONS)}")

    def layer_shapes(self) -> dict[str, tuple[int, ...]]:
        dims = (self.input_dim, *self.hidden_dims)
        shapes = {}
        for i in range(len(self.hidden_dims)):
            shapes[f"enc{i}.W"] = (dims[i], dims[i + 1])
            shapes[f"enc{i}.b"] = (dims[i + 1],)
        shapes["proj.W"] = (dims[-1], self.embed_dim)
        shapes["proj.b"] = (self.embed_dim,)
        shapes["cls.W"] = (self.embed_dim, N_CLASSES)
        shapes["cls.b"] = (N_CLASSES,)
        return shapes


@dataclass
class ReprModel:
    config: ModelConfig
    params: dict[str, np.ndarray]
    # set for models without a trained classifier head (pure metric learning)
    centroids: np.ndarray | None = field(default=None)

    def copy(self) -> "ReprModel":
        return ReprModel(
            self.config,
            {k: v.copy() for k, v in self.params.items()},
            None if self.centroids is None else self.centroids.copy(),
        )

    @property
    def n_encoder_layers(self) -> int:
        return len(self.config.hidden_dims)

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, list[np.ndarray]]:
        """Return ``(embedding, logits, activations)`` for a batch of rows."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.config.input_dim:
            raise ValueError(f"expected inputs of dimension {self.config.input_dim}, got {x.shape[-1]}")
        act, _ = ACTIVATIONS[self.config.activation]
        proj_act, _ = ACTIVATIONS[self.config.projection_activation]
        p = self.params
        acts = [x]
        h = x
        for i in range(self.n_encoder_layers):
            h = act(h @ p[f"enc{i}.W"] + p[f"enc{i}.b"])
            acts.append(h)
        e = proj_act(h @ p["proj.W"] + p["proj.b"])
        acts.append(e)
        logits = e @ p["cls.W"] + p["cls.b"]
        return e, logits, acts

    def backward(self, acts: list[np.ndarray], d_embed: np.ndarray | None, d_logits: np.ndarray | None) -> dict[str, np.ndarray]:
        """Gradients of a loss given its derivative w.r.t. embeddings and logits."""
        _, act_grad = ACTIVATIONS[self.config.activation]
        _, proj_grad = ACTIVATIONS[self.config.projection_activation]
        p = self.params
        e = acts[-1]
        grads = {}
        de = np.zeros_like(e) if d_embed is None else d_embed.copy()
        if d_logits is not None:
            grads["cls.W"] = e.T @ d_logits
            grads["cls.b"] = d_logits.sum(0)
            de += d_logits @ p["cls.W"].T
        else:
            grads["cls.W"] = np.zeros_like(p["cls.W"])
            grads["cls.b"] = np.zeros_like(p["cls.b"])
        dz = de * proj_grad(e)
        h = acts[-2]
        grads["proj.W"] = h.T @ dz
        grads["proj.b"] = dz.sum(0)
        dh = dz @ p["proj.W"].T
        for i in reversed(range(self.n_encoder_layers)):
            dz = dh * act_grad(acts[i + 1])
            grads[f"enc{i}.W"] = acts[i].T @ dz
            grads[f"enc{i}.b"] = dz.sum(0)
            if i:
                dh = dz @ p[f"enc{i}.W"].T
        return {k: grads[k] for k in p}


def init_model(cfg: ModelConfig) -> ReprModel:
    """Glorot-normal weights (variance 2/(fan_in+fan_out)), zero biases."""
    rng = np.random.default_rng(cfg.init_seed)
    params = {}
    for name, shape in cfg.layer_shapes().items():
        if name.endswith(".W"):
            std = np.sqrt(2.0 / (shape[0] + shape[1]))
            params[name] = rng.normal(0.0, std, size=shape)
        else:
            params[name] = np.zeros(shape)
    return ReprModel(cfg, params)


def _rows(x):
    x = np.asarray(x, dtype=float)
    return x[None, :] if x.ndim == 1 else x


def embed(m: ReprModel, x) -> np.ndarray:
    """Embedding of one input vector (or of each row of a matrix)."""
    x = np.asarray(x, dtype=float)
    e = m.forward(_rows(x))[0]
    return e[0] if x.ndim == 1 else e


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def classify(m: ReprModel, x) -> np.ndarray:
    """Class probabilities from the softmax head."""
    x = np.asarray(x, dtype=float)
    probs = softmax(m.forward(_rows(x))[1])
    return probs[0] if x.ndim == 1 else probs


def predict(m: ReprModel, x) -> np.ndarray | int:
    """Predicted label; argmax ties resolve to class 0.

    Models carrying class centroids (no trained classifier head) predict the
    class of the nearest centroid in embedding space instead.
    """
    x = np.asarray(x, dtype=float)
    if m.centroids is not None:
        e = m.forward(_rows(x))[0]
        d = ((e[:, None, :] - m.centroids[None, :, :]) ** 2).sum(-1)
        labels = np.argmin(d, axis=1)
    else:
        labels = np.argmax(m.forward(_rows(x))[1], axis=1)
    return int(labels[0]) if x.ndim == 1 else labels


def fit_centroids(m: ReprModel, x_train, y_train) -> ReprModel:
    """Copy of ``m`` that predicts by nearest class centroid."""
    out = m.copy()
    e = embed(out, _rows(x_train))
    y = np.asarray(y_train)
    out.centroids = np.stack([e[y == c].mean(axis=0) for c in range(N_CLASSES)])
    return out


def model_distance(m: ReprModel, a, b) -> float:
    """Euclidean distance between the embeddings of ``a`` and ``b``."""
    ea, eb = embed(m, a), embed(m, b)
    return float(np.linalg.norm(ea - eb))


def save_checkpoint(m: ReprModel, path) -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": asdict(m.config),
        "params": {k: {"shape": list(v.shape), "data": v.ravel().tolist()} for k, v in m.params.items()},
        "centroids": None if m.centroids is None else m.centroids.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_checkpoint(path) -> ReprModel:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a model checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {doc.get('version')}")
    cfg = ModelConfig(**doc["config"])
    params = {k: np.array(v["data"], dtype=float).reshape(v["shape"]) for k, v in doc["params"].items()}
    expected = cfg.layer_shapes()
    if {k: tuple(v.shape) for k, v in params.items()} != expected:
        raise ValueError(f"{path}: parameter shapes do not match the stored config")
    centroids = None if doc.get("centroids") is None else np.array(doc["centroids"], dtype=float)
    return ReprModel(cfg, params, centroids)
