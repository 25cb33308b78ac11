"""Experiment orchestration: configs, full pipelines, tables and ablations.

Everything downstream of an :class:`ExperimentConfig` is deterministic. Seeds
for triplet sampling and model training are derived from ``base_seed`` plus a
stable hash of what is being built, so adding a weight setting or a seed never
changes the numbers of cells that already existed.
"""
from __future__ import annotations

import copy
import csv
import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import triplets as trip
from .evaluate import EvalReport, SyntheticAgent, evaluate_model
from .model import ModelConfig, ReprModel, init_model
from .oracle import TABLE1_WEIGHTS, SimilarityOracle, search_weights, task_alignment
from .synth_data import (
    LiftConfig,
    SplitDataset,
    boundary_from_dict,
    generate_dataset,
    load_csv,
    model_inputs,
)
from .train import TrainConfig, train
from .triplets import TripletSet

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


DEFAULT_CONFIG: dict = {
    "data": {
        "n": 2000,
        "boundary": {"kind": "square", "lo": 0.35, "hi": 0.65},
        "ratios": [0.6, 0.2, 0.2],
        "seed": 7,
        # balanced classes and a thin exclusion band around the boundary
        "balance": True,
        "margin": 0.05,
        "lift": None,
        "path": None,
    },
    "weights": [1, 256, 256, 256],
    "weight_list": [list(w) for w in TABLE1_WEIGHTS],
    "triplets": {
        "n": 40000,
        "variant": "human",
        "filter": True,
        "val_n": 2000,
        "test_n": 4000,
        "path": None,
        "val_path": None,
        "test_path": None,
    },
    "model": {
        "embed_dim": 128,
        "hidden": [64, 64],
        "activation": "tanh",
        "projection_activation": "tanh",
    },
    "train": {
        "lambdas": [0.5],
        "margin": 1.0,
        "lr": 1e-4,
        "epochs": 50,
        "steps_per_epoch": 1000,
        "triplet_batch": 40,
        "class_batch": 30,
    },
    "seeds": [0, 1, 2],
    "base_seed": 0,
    "count_floor": 625,
    "exponent_max": 10,
    "search_budget": 20000,
    "out_dir": "runs",
}


def _merge(base: dict, over: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"unknown config key {where}{k!r}")
        if isinstance(base[k], dict) and isinstance(v, dict):
            out[k] = _merge(base[k], v, f"{where}{k}.")
        else:
            out[k] = copy.deepcopy(v)
    return out


def set_key(doc: dict, dotted: str, value) -> None:
    """Set ``doc["a"]["b"] = value`` for ``dotted="a.b"``; unknown keys raise."""
    parts = dotted.split(".")
    node = doc
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            raise ConfigError(f"unknown config key {dotted!r}")
        node = node[p]
    if parts[-1] not in node:
        raise ConfigError(f"unknown config key {dotted!r}")
    node[parts[-1]] = value


def _weights(w, what) -> tuple[float, ...]:
    try:
        return SimilarityOracle(tuple(w)).weights
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what}: {exc}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment settings; build with :meth:`from_dict`."""

    raw: dict = field(default_factory=lambda: copy.deepcopy(DEFAULT_CONFIG))

    @classmethod
    def from_dict(cls, doc: dict | None = None, overrides: dict | None = None) -> "ExperimentConfig":
        """Defaults, then ``doc``, then dotted-key ``overrides``."""
        merged = _merge(DEFAULT_CONFIG, doc or {})
        for k, v in (overrides or {}).items():
            set_key(merged, k, v)
        cfg = cls(merged)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path, overrides: dict | None = None) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
        return cls.from_dict(doc, overrides)

    def __getitem__(self, key):
        return self.raw[key]

    def to_json(self) -> str:
        return json.dumps(self.raw, sort_keys=True, indent=2)

    def validate(self) -> None:
        d, t, tr = self.raw["data"], self.raw["triplets"], self.raw["train"]
        try:
            boundary_from_dict(d["boundary"])
            LiftConfig(**d["lift"]) if d["lift"] else None
            ModelConfig(input_dim=4, hidden_dims=self.raw["model"]["hidden"], embed_dim=self.raw["model"]["embed_dim"],
                        activation=self.raw["model"]["activation"],
                        projection_activation=self.raw["model"]["projection_activation"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        if int(d["n"]) < 10:
            raise ConfigError("data.n must be >= 10")
        if len(d["ratios"]) != 3 or min(d["ratios"]) < 0 or not math.isclose(sum(d["ratios"]), 1.0, abs_tol=1e-9):
            raise ConfigError("data.ratios must be three nonnegative fractions summing to 1")
        _weights(self.raw["weights"], "weights")
        if not self.raw["weight_list"]:
            raise ConfigError("weight_list must not be empty")
        for w in self.raw["weight_list"]:
            _weights(w, "weight_list")
        if t["variant"] not in trip.VARIANTS:
            raise ConfigError(f"triplets.variant must be one of {trip.VARIANTS}")
        for k in ("n", "val_n", "test_n"):
            if int(t[k]) < 1:
                raise ConfigError(f"triplets.{k} must be positive")
        lams = tr["lambdas"]
        if not isinstance(lams, list) or not lams:
            raise ConfigError("train.lambdas must be a nonempty list")
        for lam in lams:
            if not 0.0 <= float(lam) <= 1.0:
                raise ConfigError(f"train.lambdas values must lie in [0, 1], got {lam}")
        try:
            self.train_config(0.5, 0)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        if not self.raw["seeds"] or len(set(self.raw["seeds"])) != len(self.raw["seeds"]):
            raise ConfigError("seeds must be a nonempty list of distinct integers")
        if int(self.raw["count_floor"]) < 1:
            raise ConfigError("count_floor must be positive")
        for key in (("data", "path"), ("triplets", "path"), ("triplets", "val_path"), ("triplets", "test_path")):
            p = self.raw[key[0]][key[1]]
            if p is not None and not os.path.exists(p):
                raise ConfigError(f"{'.'.join(key)}: file not found: {p}")

    @property
    def lift(self) -> LiftConfig | None:
        lift = self.raw["data"]["lift"]
        return LiftConfig(**lift) if lift else None

    def model_config(self, init_seed: int) -> ModelConfig:
        m = self.raw["model"]
        input_dim = self.lift.dim if self.lift else 4
        return ModelConfig(input_dim, tuple(m["hidden"]), int(m["embed_dim"]), m["activation"],
                           m["projection_activation"], init_seed)

    def train_config(self, lam: float, seed: int) -> TrainConfig:
        t = self.raw["train"]
        return TrainConfig(
            lam=float(lam), margin=float(t["margin"]), lr=float(t["lr"]), triplet_batch=int(t["triplet_batch"]),
            class_batch=int(t["class_batch"]), epochs=int(t["epochs"]),
            steps_per_epoch=None if t["steps_per_epoch"] is None else int(t["steps_per_epoch"]), seed=seed,
        )


def stable_hash(*parts) -> int:
    """31-bit hash of ``parts`` that is identical across processes and runs."""
    text = json.dumps([_plain(p) for p in parts], sort_keys=True)
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "big") % (2**31 - 1)


def _plain(x):
    if isinstance(x, (tuple, list)):
        return [_plain(v) for v in x]
    if isinstance(x, float) and x.is_integer():
        return int(x)
    return x


def derive_seed(base_seed: int, *setting) -> int:
    return int(base_seed) + stable_hash(*setting)


def git_blob_hash(content: bytes) -> str:
    """SHA-1 of ``content`` as git would name the blob."""
    return hashlib.sha1(b"blob %d\0" % len(content) + content).hexdigest()


def file_hash(path) -> str:
    return git_blob_hash(Path(path).read_bytes())


@dataclass(frozen=True)
class TripletSpec:
    """What a training triplet set is made of."""

    variant: str = "human"
    filtered: bool = True
    n: int = 40000

    @property
    def tag(self) -> str:
        base = "human_filtered" if self.variant == "human" and self.filtered else self.variant
        return f"{base}@{self.n}"


class Experiment:
    """Shared state for one configuration: the dataset, triplet sets and
    trained models, each built at most once."""

    def __init__(self, cfg: ExperimentConfig | dict | None = None):
        if not isinstance(cfg, ExperimentConfig):
            cfg = ExperimentConfig.from_dict(cfg)
        self.cfg = cfg
        self._data: SplitDataset | None = None
        self._inputs = None
        self._triplets: dict = {}
        self._models: dict = {}
        self.histories: dict = {}

    # data -------------------------------------------------------------
    @property
    def data(self) -> SplitDataset:
        if self._data is None:
            d = self.cfg["data"]
            boundary = boundary_from_dict(d["boundary"])
            if d["path"]:
                try:
                    self._data = load_csv(d["path"], boundary, int(d["seed"]))
                except ValueError as exc:
                    raise ConfigError(str(exc)) from None
            else:
                self._data = generate_dataset(int(d["n"]), boundary, tuple(d["ratios"]), int(d["seed"]),
                                              bool(d["balance"]), float(d["margin"]))
        return self._data

    @property
    def inputs(self) -> np.ndarray:
        if self._inputs is None:
            self._inputs = model_inputs(self.data, self.cfg.lift)
        return self._inputs

    def seed_id(self, rep: int) -> int:
        """Configured training seed of replicate ``rep``."""
        seeds = self.cfg["seeds"]
        return int(seeds[rep]) if 0 <= rep < len(seeds) else int(rep)

    def seed(self, *setting) -> int:
        return derive_seed(self.cfg["base_seed"], *setting)

    # triplets ---------------------------------------------------------
    def _cached(self, key, build):
        if key not in self._triplets:
            self._triplets[key] = build()
        return self._triplets[key]

    def raw_triplets(self, weights, split: str, n: int, rep: int, variant: str = "human") -> TripletSet:
        """Unfiltered triplets; smaller ``n`` is a prefix of the full set."""
        t_cfg = self.cfg["triplets"]
        weights = tuple(weights)
        path = {"train": t_cfg["path"], "val": t_cfg["val_path"], "test": t_cfg["test_path"]}[split]
        if path:
            loaded = self._cached(("file", path), lambda: self._load(path))
            if loaded.variant.startswith(variant):
                return loaded.head(n)
        full = int(t_cfg["n"]) if split == "train" else int(t_cfg["val_n"] if split == "val" else t_cfg["test_n"])
        size = max(full, n)
        o = SimilarityOracle(weights)
        # label-derived triplets ignore the oracle, so they are shared across settings
        w_key = None if variant == "label_derived" else o.weights
        seed_id = self.seed_id(rep)
        s = self.seed("triplets", variant, w_key, split, seed_id)
        if variant == "human":
            build = lambda: trip.sample_and_label(self.data, size, split, o, s)
        elif variant == "label_derived":
            build = lambda: trip.derive_label_triplets(self.data, size, s, ref_split=split)
        elif variant == "intra_class":
            build = lambda: trip.sample_intraclass(self.data, size, o, s, ref_split=split)
        else:
            raise ConfigError(f"cannot sample variant {variant!r} directly")
        return self._cached(("sample", variant, w_key, split, seed_id, size), build).head(n)

    def _load(self, path) -> TripletSet:
        try:
            t = trip.load(path)
            t.check_against(self.data)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return t

    def training_triplets(self, weights, spec: TripletSpec, rep: int) -> tuple[TripletSet, TripletSet]:
        """Train and validation triplets for ``spec``; validation is filtered
        whenever training is."""
        variant = "human" if spec.variant in ("human", "human_filtered") else spec.variant
        filtered = spec.filtered and variant == "human"
        t = self.raw_triplets(weights, "train", spec.n, rep, variant)
        v = self.raw_triplets(weights, "val", int(self.cfg["triplets"]["val_n"]), rep, variant)
        if filtered:
            t = trip.filter_inconsistent(t, self.data)
            v = trip.filter_inconsistent(v, self.data)
        return t, v

    def test_triplets(self, weights, rep: int) -> TripletSet:
        return self.raw_triplets(weights, "test", int(self.cfg["triplets"]["test_n"]), rep)

    # models -----------------------------------------------------------
    def model(self, lam: float, weights, rep: int, spec: TripletSpec | None = None) -> ReprModel:
        """Train (or fetch) one model.

        The init/training seed depends on the model, its lambda, the oracle
        setting and the replicate, not on the triplet recipe, so ablations
        compare models that start from the same weights.
        """
        lam = float(lam)
        seed_id = self.seed_id(rep)
        if lam == 1.0:
            # the classifier never sees triplets, so one model serves every setting
            key = ("MLE", seed_id)
            s = self.seed("model", "MLE", 1.0, seed_id)
            spec = None
        else:
            spec = spec or self.default_spec()
            weights = tuple(float(w) for w in weights)
            key = (lam, weights, spec, seed_id)
            s = self.seed("model", "TML" if lam == 0 else "HC", lam, weights, seed_id)
        if key not in self._models:
            t = v = None
            if spec is not None:
                t, v = self.training_triplets(weights, spec, rep)
            log.info("training %s (seed %d)", key, s)
            m, hist = train(init_model(self.cfg.model_config(s)), self.data, t, self.cfg.train_config(lam, s),
                            inputs=self.inputs, val_triplets=v)
            self._models[key] = m
            self.histories[key] = hist
        return self._models[key]

    def default_spec(self, n: int | None = None) -> TripletSpec:
        t = self.cfg["triplets"]
        return TripletSpec(t["variant"], bool(t["filter"]), int(t["n"] if n is None else n))

    def report(self, name: str, m: ReprModel, weights, rep: int, baseline: ReprModel | None, extra=None) -> EvalReport:
        o = SimilarityOracle(tuple(weights))
        seed_id = self.seed_id(rep)
        r = evaluate_model(
            name, m, SyntheticAgent(o), self.data, self.test_triplets(weights, rep), baseline=baseline,
            inputs=self.inputs, seed=self.seed("riro", o.weights, seed_id),
            config={"weights": list(o.weights), "seed": seed_id, **(extra or {})},
        )
        return r

    def hc_lambda(self) -> float:
        return float(self.cfg["train"]["lambdas"][0])

    def alignment(self, weights) -> float:
        return task_alignment(SimilarityOracle(tuple(weights)), self.data)


# ----------------------------------------------------------------------
# tables


@dataclass
class ResultTable:
    """Cells hold one value per seed; renders mean and min/max."""

    title: str
    rows: list[str]
    columns: list[str]
    cells: dict = field(default_factory=dict)

    def add(self, row: str, col: str, value: float) -> None:
        self.cells.setdefault((row, col), []).append(float(value))

    def values(self, row: str, col: str) -> list[float]:
        return list(self.cells.get((row, col), []))

    def mean(self, row: str, col: str) -> float:
        v = self.cells.get((row, col))
        return float(np.mean(v)) if v else float("nan")

    def row_means(self, row: str) -> list[float]:
        return [self.mean(row, c) for c in self.columns]

    def to_csv(self, path) -> None:
        """Table layout: one row per metric, one column per setting, means."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["metric", *self.columns])
            for r in self.rows:
                w.writerow([r, *("" if math.isnan(v) else f"{v:.4f}" for v in self.row_means(r))])

    def to_long_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["metric", "setting", "mean", "min", "max", "n_seeds"])
            for r in self.rows:
                for c in self.columns:
                    v = self.cells.get((r, c))
                    if v:
                        w.writerow([r, c, f"{np.mean(v):.4f}", f"{min(v):.4f}", f"{max(v):.4f}", len(v)])

    def to_markdown(self) -> str:
        lines = [f"### {self.title}", "", "| metric | " + " | ".join(self.columns) + " |",
                 "|---|" + "---|" * len(self.columns)]
        for r in self.rows:
            out = []
            for c in self.columns:
                v = self.cells.get((r, c))
                if not v:
                    out.append("")
                elif len(v) == 1:
                    out.append(f"{v[0]:.3f}")
                else:
                    out.append(f"{np.mean(v):.3f} [{min(v):.3f}, {max(v):.3f}]")
            lines.append(f"| {r} | " + " | ".join(out) + " |")
        return "\n".join(lines) + "\n"

    def write(self, out_dir, stem: str) -> list[Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = [out_dir / f"{stem}.csv", out_dir / f"{stem}_cells.csv", out_dir / f"{stem}.md"]
        self.to_csv(paths[0])
        self.to_long_csv(paths[1])
        paths[2].write_text(self.to_markdown())
        return paths


def _weights_label(w) -> str:
    return "(" + ",".join(f"{v:g}" for v in w) + ")"


def _column(exp: Experiment, w) -> str:
    return f"{exp.alignment(w) * 100:.1f}% {_weights_label(w)}"


def _replicates(exp: Experiment) -> range:
    return range(len(exp.cfg["seeds"]))


def run_single(exp: Experiment, weights=None, out_dir=None) -> list[EvalReport]:
    """MLE, TML and HC (one per configured lambda) at one oracle setting;
    one report per (model, seed)."""
    weights = tuple(exp.cfg["weights"] if weights is None else weights)
    lambdas = [float(v) for v in exp.cfg["train"]["lambdas"]]
    spec = exp.default_spec()
    reports = []
    for rep in _replicates(exp):
        mle = exp.model(1.0, weights, rep)
        reports.append(exp.report("MLE", mle, weights, rep, None))
        tml = exp.model(0.0, weights, rep, spec)
        reports.append(exp.report("TML", tml, weights, rep, mle, {"triplets": spec.tag}))
        for lam in lambdas:
            if lam in (0.0, 1.0):
                continue
            name = "HC" if len(lambdas) == 1 else f"HC(lam={lam:g})"
            hc = exp.model(lam, weights, rep, spec)
            reports.append(exp.report(name, hc, weights, rep, mle, {"triplets": spec.tag, "lam": lam}))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for r in reports:
            name = r.model.replace("(", "_").replace(")", "").replace("=", "")
            (out / f"report_{name}_seed{r.seed}.json").write_text(r.to_json() + "\n")
    return reports


TABLE1_ROWS = ("NI-H2H", "NO-H2H", "Neutral DS MLE", "Neutral DS TML", "Neutral DS HC",
               "Persuasive DS MLE", "Persuasive DS TML", "Persuasive DS HC")


def reproduce_table1(exp: Experiment) -> ResultTable:
    """HC vs MLE head-to-head and decision support across oracle settings."""
    settings = [tuple(w) for w in exp.cfg["weight_list"]]
    columns = [_column(exp, w) for w in settings]
    table = ResultTable("HC vs MLE on synthetic VW", list(TABLE1_ROWS), columns)
    lam = exp.hc_lambda()
    for w, col in zip(settings, columns):
        for rep in _replicates(exp):
            mle = exp.model(1.0, w, rep)
            tml = exp.model(0.0, w, rep)
            hc = exp.model(lam, w, rep)
            rm = exp.report("MLE", mle, w, rep, None)
            rt = exp.report("TML", tml, w, rep, mle)
            rh = exp.report("HC", hc, w, rep, mle)
            table.add("NI-H2H", col, rh.ni_h2h)
            table.add("NO-H2H", col, rh.no_h2h)
            for name, r in (("MLE", rm), ("TML", rt), ("HC", rh)):
                table.add(f"Neutral DS {name}", col, r.neutral_ds)
                table.add(f"Persuasive DS {name}", col, r.persuasive_ds)
    return table


def ablation_triplet_type(exp: Experiment, weights=None) -> ResultTable:
    """HC trained on label-derived, intra-class and filtered human triplets."""
    weights = tuple(exp.cfg["weights"] if weights is None else weights)
    n = int(exp.cfg["triplets"]["n"])
    kinds = [("label-derived", TripletSpec("label_derived", False, n)),
             ("intra-class", TripletSpec("intra_class", False, n)),
             ("HC-filtered", TripletSpec("human", True, n))]
    cols = [k for k, _ in kinds] + ["MLE"]
    rows = ["NI-H2H", "NO-H2H", "Neutral DS", "Persuasive DS"]
    table = ResultTable(f"Triplet type at {_column(exp, weights)}", rows, cols)
    lam = exp.hc_lambda()
    for rep in _replicates(exp):
        mle = exp.model(1.0, weights, rep)
        rm = exp.report("MLE", mle, weights, rep, None)
        table.add("Neutral DS", "MLE", rm.neutral_ds)
        table.add("Persuasive DS", "MLE", rm.persuasive_ds)
        for name, spec in kinds:
            r = exp.report("HC", exp.model(lam, weights, rep, spec), weights, rep, mle)
            table.add("NI-H2H", name, r.ni_h2h)
            table.add("NO-H2H", name, r.no_h2h)
            table.add("Neutral DS", name, r.neutral_ds)
            table.add("Persuasive DS", name, r.persuasive_ds)
    return table


FILTER_ROWS = ("Neutral DS filtered", "Neutral DS unfiltered", "NI-H2H filtered", "NI-H2H unfiltered",
               "NO-H2H filtered", "NO-H2H unfiltered", "Removed fraction")


def ablation_filtering(exp: Experiment) -> ResultTable:
    """HC with and without removal of classification-inconsistent triplets."""
    settings = [tuple(w) for w in exp.cfg["weight_list"]]
    columns = [_column(exp, w) for w in settings]
    table = ResultTable("Filtering inconsistent triplets", list(FILTER_ROWS), columns)
    n = int(exp.cfg["triplets"]["n"])
    lam = exp.hc_lambda()
    for w, col in zip(settings, columns):
        for rep in _replicates(exp):
            mle = exp.model(1.0, w, rep)
            raw = exp.raw_triplets(w, "train", n, rep)
            removed = 1.0 - len(trip.filter_inconsistent(raw, exp.data)) / len(raw)
            table.add("Removed fraction", col, removed)
            for tag, filtered in (("filtered", True), ("unfiltered", False)):
                r = exp.report("HC", exp.model(lam, w, rep, TripletSpec("human", filtered, n)), w, rep, mle)
                table.add(f"Neutral DS {tag}", col, r.neutral_ds)
                table.add(f"NI-H2H {tag}", col, r.ni_h2h)
                table.add(f"NO-H2H {tag}", col, r.no_h2h)
    return table


def triplet_counts(n: int, floor: int) -> list[int]:
    """``n, n/2, n/4, ...`` while the count stays at or above ``floor``."""
    if floor < 1 or n < floor:
        raise ConfigError(f"triplet count floor {floor} must lie in [1, {n}]")
    out = []
    while n >= floor:
        out.append(n)
        if n % 2:
            break
        n //= 2
    return out


def ablation_triplet_count(exp: Experiment, weights=None) -> ResultTable:
    """HC retrained on nested prefixes of the base triplet set."""
    weights = tuple(exp.cfg["weights"] if weights is None else weights)
    counts = triplet_counts(int(exp.cfg["triplets"]["n"]), int(exp.cfg["count_floor"]))
    cols = [str(c) for c in counts]
    rows = ["NI-H2H", "Neutral DS", "Persuasive DS", "Neutral DS MLE", "Triplets kept"]
    table = ResultTable(f"Triplet count at {_column(exp, weights)}", rows, cols)
    lam = exp.hc_lambda()
    base = exp.default_spec()
    for rep in _replicates(exp):
        mle = exp.model(1.0, weights, rep)
        rm = exp.report("MLE", mle, weights, rep, None)
        for c, col in zip(counts, cols):
            spec = TripletSpec(base.variant, base.filtered, c)
            r = exp.report("HC", exp.model(lam, weights, rep, spec), weights, rep, mle)
            table.add("NI-H2H", col, r.ni_h2h)
            table.add("Neutral DS", col, r.neutral_ds)
            table.add("Persuasive DS", col, r.persuasive_ds)
            table.add("Neutral DS MLE", col, rm.neutral_ds)
            table.add("Triplets kept", col, len(exp.training_triplets(weights, spec, rep)[0]))
    return table


def alignment_histogram(exp: Experiment, path=None, bins: int = 20) -> tuple[list, np.ndarray, np.ndarray]:
    """Alignment of every power-of-two weight vector, plus histogram counts."""
    rows = search_weights(int(exp.cfg["exponent_max"]), exp.data, budget=int(exp.cfg["search_budget"]))
    values = np.array([a for _, a in rows])
    counts, edges = np.histogram(values, bins=bins, range=(0.0, 1.0))
    if path is not None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["w_head", "w_body", "w_tail", "w_texture", "alignment"])
            for weights, a in rows:
                w.writerow([*(f"{v:g}" for v in weights), f"{a:.4f}"])
    return rows, counts, edges


def write_manifest(out_dir, command: str, cfg: ExperimentConfig, outputs=(), inputs=()) -> Path:
    """Config echo plus git-style hashes of inputs and outputs.

    ``content_hash`` covers the config and the inputs, so two runs with the
    same hash are expected to produce byte-identical outputs.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg_text = json.dumps(cfg.raw, sort_keys=True)
    inputs = {str(p): file_hash(p) for p in inputs if p}
    doc = {
        "command": command,
        "config": cfg.raw,
        "inputs": inputs,
        "content_hash": git_blob_hash((cfg_text + json.dumps(inputs, sort_keys=True)).encode()),
        "outputs": {Path(p).name: file_hash(p) for p in sorted(outputs, key=str)},
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return path
