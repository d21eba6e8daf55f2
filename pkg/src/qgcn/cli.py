"""Command-line entry point: featurize, train, eval, gradcheck, sweep.

Every command that owns an output directory writes the resolved
configuration and master seed into it, so any artifact can be reproduced
from the directory alone.  Exit codes: 0 success, 2 usage, 3 data,
4 numeric, 5 aggregate failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .data import (
    Dataset,
    load_canonical,
    load_checkpoint,
    load_tu_dataset,
    make_split,
    save_checkpoint,
    toy_triangles_vs_stars,
)
from .errors import (
    AggregateFailure,
    CheckpointError,
    ConfigError,
    DataError,
    GraphError,
    LabelError,
    NumericFault,
    QgcnError,
    ShapeError,
)
from .features import apply_standardizer, backend, build_feature_matrix, cached_feature_matrices
from .gradcheck import all_combinations, gradcheck_model, summarize_reports
from .model import MODEL_ACTIVATIONS, FMode
from .training import (
    RunConfig,
    evaluate,
    prepare_features,
    repeat_and_select,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
EXIT_AGGREGATE = 5

_CONFIG_DIR = os.path.join(os.path.dirname(__file__), "configs")


# ---- shared plumbing -----------------------------------------------------------


def load_dataset(path: str, fmt: str = "auto") -> Dataset:
    """Load a dataset from a TU directory/prefix or a canonical .jsonl file."""
    if path == "toy":
        return toy_triangles_vs_stars(n_per_class=30)
    if fmt == "auto":
        if path.endswith(".jsonl"):
            fmt = "canonical"
        elif os.path.isdir(path) or os.path.exists(path + "_A.txt"):
            fmt = "tu"
        else:
            raise DataError(f"cannot infer format of {path!r}; pass --format")
    if fmt == "tu":
        return load_tu_dataset(path)
    if fmt == "canonical":
        return load_canonical(path)
    raise ConfigError(f"unknown format {fmt!r}")


def _named_config_path(name: str) -> str | None:
    candidate = os.path.join(_CONFIG_DIR, name + ".json")
    return candidate if os.path.exists(candidate) else None


def _split_feature_flag(spec: str) -> tuple[str, bool]:
    """'b,c,d,external' -> ('b,c,d', True)."""
    parts = [p.strip().lower() for p in spec.replace(",", " ").split() if p.strip()]
    use_external = "external" in parts
    codes = ",".join(p for p in parts if p != "external")
    return codes, use_external


def resolve_run_config(args) -> RunConfig:
    """Config file (packaged name or path) first, explicit flags override."""
    base: dict = {}
    if getattr(args, "config", None):
        path = args.config
        if not os.path.exists(path):
            named = _named_config_path(args.config)
            if named is None:
                raise ConfigError(f"config {args.config!r} is neither a file nor a packaged name")
            path = named
        with open(path, "r", encoding="utf-8") as fh:
            try:
                base = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config {path}: invalid JSON ({exc})") from exc

    overrides: dict = {}
    flag_map = {
        "activation": "activation",
        "f_mode": "f_mode",
        "adjacency": "adjacency",
        "batch_size": "batch_size",
        "l2": "l2_coefficient",
        "standardize": "standardization",
        "epochs": "epochs",
        "patience": "patience",
        "repeats": "repeats",
        "seed": "seed",
        "lr": "learning_rate",
        "dropout": "dropout",
    }
    for flag, key in flag_map.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "features", None) is not None:
        codes, use_external = _split_feature_flag(args.features)
        overrides["feature_set"] = codes
        overrides["use_external"] = use_external
    if getattr(args, "layers", None) is not None:
        overrides["layer_widths"] = tuple(int(w) for w in args.layers.split(",") if w)

    merged = dict(base)
    merged.update(overrides)
    return RunConfig.from_dict(merged)


def _ensure_out(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---- featurize -----------------------------------------------------------------


def cmd_featurize(args) -> int:
    dataset = load_dataset(args.dataset, args.format)
    codes, use_external = _split_feature_flag(args.features if args.features is not None else "b,c,d")
    out = _ensure_out(args.out)

    from .features import cache_key, parse_feature_set

    feature_set = parse_feature_set(codes)
    key = cache_key(dataset.content_id(), feature_set, use_external,
                    args.centrality, args.second_moment)
    cache_path = os.path.join(out, key + ".qmx")
    cache_hit = os.path.exists(cache_path)
    t0 = time.perf_counter()
    matrices = cached_feature_matrices(
        dataset.graphs, feature_set, use_external, out, dataset.content_id(),
        centrality_kind=args.centrality, second_moment=args.second_moment)
    elapsed = time.perf_counter() - t0

    stacked = np.concatenate([m.values for m in matrices], axis=0) \
        if matrices[0].values.size else np.zeros((0, 0))
    hist_path = os.path.join(out, "histogram.csv")
    with open(hist_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["column", "bin_lo", "bin_hi", "count"])
        for j, name in enumerate(matrices[0].column_names):
            counts, edges = np.histogram(stacked[:, j], bins=50)
            for k, count in enumerate(counts):
                writer.writerow([name, f"{edges[k]:.9g}", f"{edges[k + 1]:.9g}", int(count)])

    record = {
        "command": "featurize",
        "dataset": args.dataset,
        "stats": dataset.stats(),
        "features": sorted(feature_set),
        "use_external": use_external,
        "centrality": args.centrality,
        "second_moment": args.second_moment,
        "columns": list(matrices[0].column_names),
        "matrix_count": len(matrices),
        "cache_file": os.path.basename(cache_path),
        "cache_hit": cache_hit,
        "backend": backend(),
        "seconds": round(elapsed, 3),
        "version": __version__,
    }
    _write_json(os.path.join(out, "featurize.json"), record)
    print(f"featurized {len(matrices)} graphs -> {cache_path} "
          f"({'cache hit' if cache_hit else 'computed'}, {elapsed:.2f}s, backend={backend()})")
    print(f"histogram -> {hist_path}")
    return EXIT_OK


# ---- train -----------------------------------------------------------------------


def _summary_payload(args, config: RunConfig, dataset: Dataset, outcome) -> dict:
    runs = []
    for r in outcome.runs:
        runs.append({
            "seed": r.seed,
            "best_epoch": r.best_epoch,
            "best_val_accuracy": None if r.error else r.best_val_accuracy,
            "test_accuracy": r.test_accuracy,
            "epochs_run": len(r.epochs),
            "wall_clock_s": round(r.wall_clock, 3),
            "split_hash": r.split_hash,
            "error": r.error,
        })
    return {
        "command": "train",
        "dataset": args.dataset,
        "stats": dataset.stats(),
        "run_config": config.to_dict(),
        "split_hash": outcome.split_hash,
        "best": {
            "seed": outcome.best.seed,
            "best_epoch": outcome.best.best_epoch,
            "val_accuracy": outcome.best.best_val_accuracy,
            "test_accuracy": outcome.best.test_accuracy,
        },
        "test_accuracy_best": outcome.best.test_accuracy,
        "test_accuracy_mean": outcome.test_mean,
        "test_accuracy_stderr": outcome.test_stderr,
        "repeats_failed": sum(1 for r in outcome.runs if r.error),
        "runs": runs,
        "backend": backend(),
        "version": __version__,
    }


def _write_metrics_csv(path: str, result) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "train_accuracy", "val_loss", "val_accuracy"])
        for rec in result.epochs:
            writer.writerow([rec.epoch, f"{rec.train_loss:.9g}", f"{rec.train_accuracy:.6f}",
                             f"{rec.val_loss:.9g}", f"{rec.val_accuracy:.6f}"])


def cmd_train(args) -> int:
    config = resolve_run_config(args)
    dataset = load_dataset(args.dataset, args.format)
    out = _ensure_out(args.out)
    _write_json(os.path.join(out, "config.json"), {
        "dataset": args.dataset, "format": args.format,
        "seed": config.seed, "run_config": config.to_dict(),
    })

    def progress(i, run):
        status = f"error: {run.error}" if run.error else (
            f"val={run.best_val_accuracy:.4f} test={run.test_accuracy:.4f} "
            f"epoch*={run.best_epoch} ({len(run.epochs)} epochs, {run.wall_clock:.1f}s)")
        print(f"  repeat {i + 1}/{config.repeats} seed={run.seed} {status}", flush=True)

    outcome = repeat_and_select(config, dataset, cache_dir=args.cache, progress=progress)

    summary = _summary_payload(args, config, dataset, outcome)
    _write_json(os.path.join(out, "summary.json"), summary)
    _write_metrics_csv(os.path.join(out, "metrics.csv"), outcome.best)
    checkpoint_path = os.path.join(out, "model.qckpt")
    save_checkpoint(
        checkpoint_path, outcome.best.params, outcome.model_config,
        config.to_dict(), outcome.standardizer,
        extra_meta={
            "dataset": args.dataset,
            "split_hash": outcome.best.split_hash,
            "best_seed": outcome.best.seed,
            "test_accuracy": outcome.best.test_accuracy,
        })
    print(f"best test accuracy {outcome.best.test_accuracy:.4f} "
          f"(mean {outcome.test_mean:.4f} +/- {outcome.test_stderr:.4f} over "
          f"{sum(1 for r in outcome.runs if not r.error)} runs)")
    print(f"artifacts -> {out}")
    return EXIT_OK


# ---- eval ------------------------------------------------------------------------


def cmd_eval(args) -> int:
    bundle = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.dataset, args.format)
    config = RunConfig.from_dict(bundle.run_config)
    adjs, feats = prepare_features(dataset, config)
    if bundle.standardizer is not None:
        feats = [apply_standardizer(bundle.standardizer, f) for f in feats]
    labels = dataset.labels()
    items = [(adjs[i], feats[i], int(labels[i])) for i in range(dataset.size)]

    if args.split != "all":
        split = make_split(dataset.size, config.split, config.seed)
        indices = {"train": split.train, "validation": split.validation,
                   "test": split.test}[args.split]
        items = [items[i] for i in indices]
    if not items:
        raise DataError(f"split {args.split!r} selects no graphs")

    accuracy = evaluate(bundle.params, bundle.model_config, items)
    record = {
        "command": "eval",
        "checkpoint": args.checkpoint,
        "dataset": args.dataset,
        "split": args.split,
        "n_graphs": len(items),
        "accuracy": accuracy,
        "version": __version__,
    }
    print(json.dumps(record, indent=2, sort_keys=True))
    if args.out:
        _write_json(args.out, record)
    return EXIT_OK


# ---- gradcheck ---------------------------------------------------------------------


def cmd_gradcheck(args) -> int:
    rows = []
    failed = 0
    t0 = time.perf_counter()
    for i, (f_mode, activation, adjacency) in enumerate(all_combinations()):
        report = summarize_reports(gradcheck_model(
            f_mode, activation, adjacency, seed=args.seed + i, corrupt=args.corrupt))
        status = "PASS" if report.passed else "FAIL"
        failed += 0 if report.passed else 1
        rows.append((f_mode.value, activation, adjacency.value, report.worst_rel,
                     report.worst_abs, report.n_checked, status,
                     ";".join(report.failed_params)))
        print(f"{status}  f_mode={f_mode.value:<6} activation={activation:<7} "
              f"adjacency={adjacency.value:<17} worst_rel={report.worst_rel:.3e} "
              f"entries={report.n_checked}"
              + (f"  failed={','.join(report.failed_params)}" if not report.passed else ""))
    elapsed = time.perf_counter() - t0
    print(f"{len(rows) - failed}/{len(rows)} combinations passed in {elapsed:.1f}s")

    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["f_mode", "activation", "adjacency", "worst_rel_err",
                             "worst_abs_err", "entries", "status", "failed_params"])
            for row in rows:
                writer.writerow(row)
    return EXIT_OK if failed == 0 else EXIT_NUMERIC


# ---- sweep -------------------------------------------------------------------------


def cmd_sweep(args) -> int:
    base = resolve_run_config(args)
    dataset = load_dataset(args.dataset, args.format)
    out = _ensure_out(args.out)

    if args.sweep == "activation":
        values = list(MODEL_ACTIVATIONS)
        make = lambda v: base.with_overrides(activation=v)
    else:
        values = [m.value for m in FMode]
        make = lambda v: base.with_overrides(f_mode=v)

    _write_json(os.path.join(out, "sweep.json"), {
        "command": "sweep", "sweep": args.sweep, "values": values,
        "dataset": args.dataset, "seed": base.seed,
        "run_config": base.to_dict(),
    })

    rows = []
    hashes = set()
    for value in values:
        config = make(value)
        print(f"sweep {args.sweep}={value}", flush=True)
        try:
            outcome = repeat_and_select(config, dataset, cache_dir=args.cache)
            rows.append({
                "value": value,
                "best_test_accuracy": outcome.best.test_accuracy,
                "mean_test_accuracy": outcome.test_mean,
                "stderr": outcome.test_stderr,
                "split_hash": outcome.split_hash,
                "status": "ok",
            })
            hashes.add(outcome.split_hash)
            print(f"  best={outcome.best.test_accuracy:.4f} mean={outcome.test_mean:.4f}")
        except (AggregateFailure, NumericFault) as exc:
            rows.append({"value": value, "best_test_accuracy": None,
                         "mean_test_accuracy": None, "stderr": None,
                         "split_hash": None, "status": f"failed: {exc}"})
            print(f"  failed: {exc}", file=sys.stderr)

    if len(hashes) > 1:
        raise AggregateFailure(f"sweep rows disagree on the split: {sorted(hashes)}")

    csv_path = os.path.join(out, "sweep.csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["value", "best_test_accuracy", "mean_test_accuracy",
                         "stderr", "split_hash", "status"])
        for row in rows:
            writer.writerow([row["value"],
                             "" if row["best_test_accuracy"] is None else f"{row['best_test_accuracy']:.6f}",
                             "" if row["mean_test_accuracy"] is None else f"{row['mean_test_accuracy']:.6f}",
                             "" if row["stderr"] is None else f"{row['stderr']:.6f}",
                             row["split_hash"] or "", row["status"]])
    print(f"table -> {csv_path}")
    if all(row["status"] != "ok" for row in rows):
        raise AggregateFailure("every sweep cell failed")
    return EXIT_OK


# ---- parser ------------------------------------------------------------------------


def _add_dataset_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", required=True,
                   help="TU directory/prefix, canonical .jsonl file, or 'toy'")
    p.add_argument("--format", choices=["auto", "tu", "canonical"], default="auto")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="packaged config name or JSON path")
    p.add_argument("--features", help="comma list of b,c,d plus optional 'external'")
    p.add_argument("--activation", choices=list(MODEL_ACTIVATIONS))
    p.add_argument("--f-mode", dest="f_mode", choices=[m.value for m in FMode])
    p.add_argument("--adjacency", help="degree_normalized (nr/nrs) or raw_sum")
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--l2", type=float)
    p.add_argument("--standardize", dest="standardize", choices=["zscore", "minmax"])
    p.add_argument("--epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--dropout", type=float)
    p.add_argument("--layers", help="comma list of layer widths, e.g. 250,250")
    p.add_argument("--cache", help="feature cache directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qgcn",
        description="Graph classification with quadratic GCN readout.")
    parser.add_argument("--version", action="version", version=f"qgcn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("featurize", help="compute and cache topological features")
    _add_dataset_flags(p)
    p.add_argument("--features", help="comma list of b,c,d plus optional 'external'")
    p.add_argument("--centrality", choices=["betweenness", "closeness"], default="betweenness")
    p.add_argument("--second-moment", dest="second_moment", choices=["std", "raw"], default="std")
    p.add_argument("--out", required=True, help="output/cache directory")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="run the repeat-and-select training protocol")
    _add_dataset_flags(p)
    _add_run_flags(p)
    p.add_argument("--out", required=True, help="run directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    _add_dataset_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=["train", "validation", "test", "all"], default="test")
    p.add_argument("--out", help="optional JSON record path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check over all model variants")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corrupt", help=argparse.SUPPRESS)  # test hook: parameter name
    p.add_argument("--out", help="optional CSV report path")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("sweep", help="activation or readout-mode comparison table")
    _add_dataset_flags(p)
    _add_run_flags(p)
    p.add_argument("--sweep", choices=["activation", "f-mode"], required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors and 0 for --help/--version
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, GraphError, LabelError, CheckpointError, ShapeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericFault as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except AggregateFailure as exc:
        print(f"aggregate failure: {exc}", file=sys.stderr)
        return EXIT_AGGREGATE
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except QgcnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
