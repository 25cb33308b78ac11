"""Command-line front end.

Every subcommand reads an optional JSON config (``--config``); flags and
``--set key.sub=value`` pairs override individual keys. Outputs go under
``--out`` (config key ``out_dir``) together with a ``manifest.json``.

Exit codes: 0 success, 2 configuration or input error, 3 numerical divergence.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import triplets as trip
from .experiments import (
    ConfigError,
    Experiment,
    ExperimentConfig,
    ablation_filtering,
    ablation_triplet_count,
    ablation_triplet_type,
    alignment_histogram,
    reproduce_table1,
    run_single,
    write_manifest,
)
from .model import load_checkpoint, save_checkpoint
from .oracle import SimilarityOracle, parse_weights
from .synth_data import save_csv
from .train import DivergenceError

log = logging.getLogger("hcrep")

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3


def _csv_floats(text):
    return list(parse_weights(text).weights)


def _csv_ints(text):
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _weight_list(text):
    return [_csv_floats(part) for part in text.split(";")]


# flag -> (config key, argparse kwargs)
FLAGS = {
    "--n": ("data.n", dict(type=int, help="dataset size")),
    "--data-seed": ("data.seed", dict(type=int)),
    "--data": ("data.path", dict(help="dataset CSV written by gen-data")),
    "--weights": ("weights", dict(type=_csv_floats, help="oracle weights, e.g. 1,256,256,256")),
    "--weight-list": ("weight_list", dict(type=_weight_list, help="semicolon-separated weight vectors")),
    "--n-triplets": ("triplets.n", dict(type=int)),
    "--variant": ("triplets.variant", dict(choices=trip.VARIANTS)),
    "--filter": ("triplets.filter", dict(action=argparse.BooleanOptionalAction, default=None)),
    "--triplets": ("triplets.path", dict(help="training triplet file")),
    "--val-triplets": ("triplets.val_path", dict()),
    "--test-triplets": ("triplets.test_path", dict()),
    "--embed-dim": ("model.embed_dim", dict(type=int)),
    "--hidden": ("model.hidden", dict(type=_csv_ints)),
    "--lam": ("train.lambdas", dict(type=lambda s: [float(s)], help="HC trade-off lambda")),
    "--epochs": ("train.epochs", dict(type=int)),
    "--steps-per-epoch": ("train.steps_per_epoch", dict(type=int)),
    "--lr": ("train.lr", dict(type=float)),
    "--seeds": ("seeds", dict(type=_csv_ints, help="training seeds, e.g. 0,1,2")),
    "--base-seed": ("base_seed", dict(type=int)),
    "--count-floor": ("count_floor", dict(type=int)),
    "--exponent-max": ("exponent_max", dict(type=int)),
    "--out": ("out_dir", dict(help="output directory")),
}


def _parse_set(items) -> dict:
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key (JSON value)")
    common.add_argument("-v", "--verbose", action="count", default=0)
    for flag, (key, kw) in FLAGS.items():
        kw = dict(kw)
        kw.setdefault("default", None)
        common.add_argument(flag, dest=key, **kw)

    p = argparse.ArgumentParser(prog="hcrep", description="Human-compatible representation experiments on synthetic VW data.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("gen-data", parents=[common], help="write the dataset CSV")
    g = sub.add_parser("gen-triplets", parents=[common], help="sample and label triplets")
    g.add_argument("--split", choices=("train", "val", "test"), default="train")
    g.add_argument("--replicate", type=int, default=0)
    t = sub.add_parser("train", parents=[common], help="train one model and save a checkpoint")
    t.add_argument("--replicate", type=int, default=0)
    e = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    e.add_argument("--model", required=True, help="checkpoint to evaluate")
    e.add_argument("--baseline", help="checkpoint to compare against in H2H")
    e.add_argument("--name", default="model")
    e.add_argument("--replicate", type=int, default=0)
    sub.add_parser("run", parents=[common], help="MLE, TML and HC at one setting")
    sub.add_parser("table1", parents=[common], help="HC vs MLE across weight settings")
    sub.add_parser("ablate-type", parents=[common], help="label-derived vs intra-class vs filtered triplets")
    sub.add_parser("ablate-filter", parents=[common], help="filtered vs unfiltered HC")
    sub.add_parser("ablate-count", parents=[common], help="HC vs number of triplets")
    sub.add_parser("align-hist", parents=[common], help="alignment of power-of-two weight vectors")
    return p


def load_config(args) -> ExperimentConfig:
    overrides = {key: getattr(args, key) for _, (key, _) in FLAGS.items() if getattr(args, key) is not None}
    overrides.update(_parse_set(args.set))
    if args.config:
        return ExperimentConfig.load(args.config, overrides)
    return ExperimentConfig.from_dict(None, overrides)


def _inputs(cfg: ExperimentConfig) -> list:
    return [cfg["data"]["path"], *(cfg["triplets"][k] for k in ("path", "val_path", "test_path"))]


def _cmd_gen_data(exp, args, out):
    path = out / "data.csv"
    save_csv(exp.data, path)
    return [path]


def _cmd_gen_triplets(exp, args, out):
    cfg = exp.cfg
    spec = exp.default_spec()
    w = tuple(cfg["weights"])
    if args.split == "test":
        t = exp.test_triplets(w, args.replicate)
    else:
        train_t, val_t = exp.training_triplets(w, spec, args.replicate)
        t = train_t if args.split == "train" else val_t
    path = out / f"triplets_{args.split}.csv"
    trip.save(t, path)
    log.info("wrote %d %s triplets to %s", len(t), t.variant, path)
    return [path]


def _cmd_train(exp, args, out):
    lam = exp.hc_lambda()
    m = exp.model(lam, exp.cfg["weights"], args.replicate)
    hist = list(exp.histories.values())[-1]
    paths = [out / "model.json", out / "history.csv"]
    save_checkpoint(m, paths[0])
    hist.write_csv(paths[1])
    return paths


def _cmd_eval(exp, args, out):
    try:
        m = load_checkpoint(args.model)
        base = load_checkpoint(args.baseline) if args.baseline else None
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load checkpoint: {exc}") from None
    o = SimilarityOracle(tuple(exp.cfg["weights"]))
    r = exp.report(args.name, m, o.weights, args.replicate, base)
    path = out / "report.json"
    path.write_text(r.to_json() + "\n")
    print(r.to_json())
    return [path]


def _cmd_run(exp, args, out):
    run_single(exp, out_dir=out)
    return sorted(out.glob("report_*.json"))


def _table(fn, stem):
    def cmd(exp, args, out):
        table = fn(exp)
        print(table.to_markdown())
        return table.write(out, stem)

    return cmd


def _cmd_align_hist(exp, args, out):
    path = out / "alignment.csv"
    rows, counts, edges = alignment_histogram(exp, path)
    for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
        print(f"{lo:.2f}-{hi:.2f} {c}")
    return [path]


COMMANDS = {
    "gen-data": _cmd_gen_data,
    "gen-triplets": _cmd_gen_triplets,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "run": _cmd_run,
    "table1": _table(reproduce_table1, "table1"),
    "ablate-type": _table(ablation_triplet_type, "ablate_type"),
    "ablate-filter": _table(ablation_filtering, "ablate_filter"),
    "ablate-count": _table(ablation_triplet_count, "ablate_count"),
    "align-hist": _cmd_align_hist,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        out = Path(cfg["out_dir"])
        out.mkdir(parents=True, exist_ok=True)
        exp = Experiment(cfg)
        outputs = COMMANDS[args.command](exp, args, out)
        write_manifest(out, args.command, cfg, outputs, _inputs(cfg))
    except DivergenceError as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConfigError, trip.TripletFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
