"""Command-line front end.

Subcommands: list, describe, fetch, synth, train, evaluate.  A training run
produces a self-describing directory: config snapshot, one checkpoint and one
metrics JSON per seed, an aggregate summary, fitted preprocessing stats when
the dataset uses any, and a plain-text log with one line per epoch.  All
randomness flows from --seed, so identical invocations produce identical run
directories (timestamps live only in the log).
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import codec, hub, models, registry, synth, training
from .errors import Pd4mlError


def _write_text_atomic(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


def _cmd_list(args) -> int:
    for name, desc in registry.REGISTRY.items():
        splits = ("/".join(registry.format_count(desc.splits[s]) for s in registry.SPLITS)
                  if desc.splits else "synthetic")
        print(f"{name:18s} {desc.task:14s} {splits:18s} {desc.structure}")
    return 0


def _cmd_describe(args) -> int:
    registry.print_description(args.name)
    return 0


def _cmd_fetch(args) -> int:
    for split in registry.SPLITS:
        file = hub.ensure_local(args.name, split, args.path, args.force)
        print(f"{args.name}/{split}: ok ({file})")
    return 0


def _cmd_synth(args) -> int:
    name = hub.synth_write(args.kind, args.n, args.seed, args.out)
    print(f"wrote {name} (3 x {args.n} samples, seed {args.seed}) under {args.out}")
    return 0


def _run_dir_files(run_dir: Path):
    return sorted(run_dir.glob("model_seed*.pd4m"))


def _cmd_train(args) -> int:
    desc = registry.registry_lookup(args.dataset)
    graph = args.model == "graphnet"
    data = {
        split: hub.load_data(args.dataset, split, args.path, graph=graph)
        for split in registry.SPLITS
    }
    preset = training.graphnet_preset if graph else training.fcn_preset
    config = preset(batch_size=args.batch_size, max_epochs=args.epochs,
                    early_stop_patience=args.patience, learning_rate=args.lr)
    width = args.width or models.DEFAULT_WIDTH
    seeds = list(range(args.seed, args.seed + args.seeds))

    run_dir = Path(args.out)
    run_dir.mkdir(parents=True, exist_ok=True)

    def one_seed(seed: int):
        lines = []

        def log_fn(epoch, train_loss, val_loss, lr):
            ts = time.strftime("%Y-%m-%d %H:%M:%S")
            lines.append(f"{ts} seed {seed} epoch {epoch}, "
                         f"{train_loss:.6f}, {val_loss:.6f}, {lr:g}")

        cfg = copy.copy(config)  # train_run stamps the seed; keep runs isolated
        model, history = training.train_run(
            args.dataset, args.model, data["train"], data["validation"],
            data["test"], desc.task, seed, width, cfg, log_fn=log_fn)
        return model, history, lines

    workers = min(len(seeds), args.workers)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one_seed, seeds))
    else:
        results = [one_seed(s) for s in seeds]

    histories = []
    log_lines = []
    for seed, (model, history, lines) in zip(seeds, results):
        models.save_checkpoint(model, run_dir / f"model_seed{seed}.pd4m")
        _write_text_atomic(run_dir / f"metrics_seed{seed}.json",
                           history.to_json() + "\n")
        histories.append(history)
        log_lines.extend(lines)

    summary = training.aggregate_runs(histories)
    _write_text_atomic(run_dir / "summary.json",
                       json.dumps(summary, sort_keys=True, indent=2) + "\n")
    snapshot = {
        "dataset": args.dataset,
        "model": args.model,
        "task": desc.task,
        "path": str(Path(args.path).resolve()),
        "hidden_width": width,
        "seeds": seeds,
        "batch_size": config.batch_size,
        "max_epochs": config.max_epochs,
        "early_stop_patience": config.early_stop_patience,
        "plateau_patience": config.plateau_patience,
        "plateau_factor": config.plateau_factor,
        "learning_rate": config.learning_rate,
    }
    _write_text_atomic(run_dir / "config.json",
                       json.dumps(snapshot, sort_keys=True, indent=2) + "\n")
    stats = hub.fitted_stats(args.dataset, args.path)
    if stats is not None:
        codec.codec_write(hub.stats_tensor_map(stats), run_dir / "stats.pd4m")
    _write_text_atomic(run_dir / "train.log", "\n".join(log_lines) + "\n")

    print(json.dumps(summary, sort_keys=True, indent=2))
    print(f"run directory: {run_dir}")
    return 0


def _cmd_evaluate(args) -> int:
    run_dir = Path(args.run_dir)
    cfg_file = run_dir / "config.json"
    if not cfg_file.exists():
        raise Pd4mlError(f"{run_dir} is not a run directory (no config.json)")
    cfg = json.loads(cfg_file.read_text(encoding="utf-8"))
    graph = cfg["model"] == "graphnet"
    data = hub.load_data(cfg["dataset"], args.split, cfg["path"], graph=graph)
    runs = []
    histories = []
    for ckpt in _run_dir_files(run_dir):
        seed = int(ckpt.stem.replace("model_seed", ""))
        model = models.load_checkpoint(ckpt)
        metrics = training.evaluate_model(model, data, cfg["task"])
        runs.append({"seed": seed, "metrics": metrics})
        histories.append(training.RunMetrics(cfg["dataset"], cfg["model"], seed,
                                             0, 0.0, metrics=metrics))
    if not runs:
        raise Pd4mlError(f"no checkpoints found in {run_dir}")
    doc = {"split": args.split, "runs": runs,
           "aggregate": training.aggregate_runs(histories)}
    print(json.dumps(doc, sort_keys=True, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pd4ml",
        description="physics benchmark datasets, graph recipes, and the two "
                    "shared baseline networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="show registered datasets").set_defaults(fn=_cmd_list)

    p = sub.add_parser("describe", help="print one dataset description")
    p.add_argument("name")
    p.set_defaults(fn=_cmd_describe)

    p = sub.add_parser("fetch", help="download and verify all splits")
    p.add_argument("name")
    p.add_argument("--path", default="./data")
    p.add_argument("--force", action="store_true", help="re-fetch even when present")
    p.set_defaults(fn=_cmd_fetch)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("kind", choices=synth.SYNTH_KINDS)
    p.add_argument("--n", type=int, required=True, help="samples per split")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="./data")
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("train", help="train one of the two baseline models")
    p.add_argument("dataset")
    p.add_argument("--model", choices=("fcn", "graphnet"), required=True)
    p.add_argument("--path", default="./data")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=int, default=1,
                   help="train N runs with seeds S..S+N-1 and aggregate")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--width", type=int, default=None,
                   help="hidden width override (desk-scale testing)")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None, dest="batch_size")
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--patience", type=int, default=None,
                   help="early-stop patience override")
    p.add_argument("--workers", type=int, default=4,
                   help="parallel workers for multi-seed runs")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("evaluate", help="re-score a run directory on one split")
    p.add_argument("run_dir")
    p.add_argument("--split", default="test", choices=registry.SPLITS)
    p.set_defaults(fn=_cmd_evaluate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except Pd4mlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
