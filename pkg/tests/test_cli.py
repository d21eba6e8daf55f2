"""End-to-end command-line runs, in process via main(argv)."""

from __future__ import annotations

import csv
import json
import os

import pytest

from qgcn.cli import (
    EXIT_AGGREGATE,
    EXIT_DATA,
    EXIT_NUMERIC,
    EXIT_OK,
    EXIT_USAGE,
    load_dataset,
    main,
)
from qgcn.data import load_checkpoint, load_matrix_stack

TRIANGLE = [(0, 1), (1, 2), (0, 2)]
PATH4 = [(0, 1), (1, 2), (2, 3)]

FAST_TRAIN = ["--epochs", "2", "--repeats", "2", "--layers", "8",
              "--batch-size", "8", "--seed", "0"]


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# ---- featurize -------------------------------------------------------------------


def test_featurize_writes_artifacts_then_hits_cache(tu_writer, tmp_path, capsys):
    data_dir = tu_writer("feat", [TRIANGLE, PATH4, TRIANGLE], [3, 4, 3], [0, 1, 0])
    out = str(tmp_path / "cache")
    assert main(["featurize", "--dataset", data_dir, "--out", out]) == EXIT_OK

    record = read_json(os.path.join(out, "featurize.json"))
    assert record["cache_hit"] is False
    assert record["matrix_count"] == 3
    assert record["columns"] == ["degree", "betweenness", "bfs_mean", "bfs_std"]
    assert record["stats"]["num_graphs"] == 3

    mats, meta = load_matrix_stack(os.path.join(out, record["cache_file"]))
    assert len(mats) == 3
    assert mats[0].shape == (3, 4)

    hist = read_csv(os.path.join(out, "histogram.csv"))
    assert hist[0] == ["column", "bin_lo", "bin_hi", "count"]
    assert len(hist) == 1 + 4 * 50  # 50 bins per feature column
    # counts per column sum to the total vertex count
    degree_rows = [r for r in hist[1:] if r[0] == "degree"]
    assert sum(int(r[3]) for r in degree_rows) == 10

    capsys.readouterr()
    assert main(["featurize", "--dataset", data_dir, "--out", out]) == EXIT_OK
    assert "cache hit" in capsys.readouterr().out
    assert read_json(os.path.join(out, "featurize.json"))["cache_hit"] is True


def test_featurize_subset_and_options(tu_writer, tmp_path):
    data_dir = tu_writer("sub", [TRIANGLE, PATH4], [3, 4], [0, 1])
    out = str(tmp_path / "cache")
    rc = main(["featurize", "--dataset", data_dir, "--out", out,
               "--features", "c,d", "--centrality", "closeness",
               "--second-moment", "raw"])
    assert rc == EXIT_OK
    record = read_json(os.path.join(out, "featurize.json"))
    assert record["columns"] == ["degree", "closeness"]
    assert record["centrality"] == "closeness"
    assert record["second_moment"] == "raw"


def test_featurize_unknown_code_is_usage_error(tmp_path):
    rc = main(["featurize", "--dataset", "toy", "--out", str(tmp_path / "x"),
               "--features", "z"])
    assert rc == EXIT_USAGE


# ---- train ------------------------------------------------------------------------


@pytest.fixture(scope="module")
def toy_run(tmp_path_factory):
    """One shared fast toy training run; several tests inspect its artifacts."""
    out = str(tmp_path_factory.mktemp("run"))
    rc = main(["train", "--dataset", "toy", "--out", out] + FAST_TRAIN)
    assert rc == EXIT_OK
    return out


def test_train_writes_summary(toy_run):
    summary = read_json(os.path.join(toy_run, "summary.json"))
    assert summary["dataset"] == "toy"
    assert summary["run_config"]["epochs"] == 2
    assert summary["run_config"]["layer_widths"] == [8]
    assert len(summary["runs"]) == 2
    assert summary["repeats_failed"] == 0
    assert summary["best"]["test_accuracy"] == summary["test_accuracy_best"]
    assert 0.0 <= summary["test_accuracy_mean"] <= 1.0
    assert summary["test_accuracy_stderr"] >= 0.0
    # every run trained on the same fixed split
    hashes = {r["split_hash"] for r in summary["runs"]}
    assert hashes == {summary["split_hash"]}
    best_rows = [r for r in summary["runs"] if r["seed"] == summary["best"]["seed"]]
    assert best_rows[0]["best_val_accuracy"] == summary["best"]["val_accuracy"]


def test_train_writes_config_and_metrics(toy_run):
    config = read_json(os.path.join(toy_run, "config.json"))
    assert config["dataset"] == "toy"
    assert config["seed"] == 0
    assert config["run_config"]["batch_size"] == 8

    rows = read_csv(os.path.join(toy_run, "metrics.csv"))
    assert rows[0] == ["epoch", "train_loss", "train_accuracy", "val_loss", "val_accuracy"]
    summary = read_json(os.path.join(toy_run, "summary.json"))
    best_row = next(r for r in summary["runs"] if r["seed"] == summary["best"]["seed"])
    assert len(rows) == 1 + best_row["epochs_run"]
    assert [r[0] for r in rows[1:]] == [str(i) for i in range(1, len(rows))]


def test_train_checkpoint_is_loadable(toy_run):
    bundle = load_checkpoint(os.path.join(toy_run, "model.qckpt"))
    summary = read_json(os.path.join(toy_run, "summary.json"))
    assert bundle.meta["extra"]["dataset"] == "toy"
    assert bundle.meta["extra"]["best_seed"] == summary["best"]["seed"]
    assert bundle.meta["extra"]["test_accuracy"] == summary["test_accuracy_best"]
    assert bundle.run_config["epochs"] == 2
    assert bundle.standardizer is not None


def test_train_packaged_config_with_overrides(tmp_path):
    out = str(tmp_path / "cfgrun")
    rc = main(["train", "--dataset", "toy", "--out", out, "--config", "mutagenicity",
               "--epochs", "1", "--repeats", "1", "--layers", "4"])
    assert rc == EXIT_OK
    summary = read_json(os.path.join(out, "summary.json"))
    # file values survive where no flag overrides them
    assert summary["run_config"]["batch_size"] == 128
    assert summary["run_config"]["feature_set"] == "cd"
    assert summary["run_config"]["standardization"] == "zscore"
    # flags win over the file
    assert summary["run_config"]["epochs"] == 1
    assert summary["run_config"]["layer_widths"] == [4]


def test_unknown_config_name_is_usage_error(tmp_path):
    rc = main(["train", "--dataset", "toy", "--out", str(tmp_path / "x"),
               "--config", "no-such-dataset"])
    assert rc == EXIT_USAGE


def test_missing_dataset_is_data_error(tmp_path):
    rc = main(["train", "--dataset", str(tmp_path / "absent"),
               "--out", str(tmp_path / "x")] + FAST_TRAIN)
    assert rc == EXIT_DATA


def test_usage_errors_from_argparse(capsys):
    assert main(["train", "--no-such-flag"]) == EXIT_USAGE
    assert main(["no-such-command"]) == EXIT_USAGE
    capsys.readouterr()


def test_version_flag_exits_clean(capsys):
    assert main(["--version"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("qgcn ")


# ---- eval -------------------------------------------------------------------------


def test_eval_matches_training_summary(toy_run, tmp_path, capsys):
    summary = read_json(os.path.join(toy_run, "summary.json"))
    record_path = str(tmp_path / "eval.json")
    rc = main(["eval", "--dataset", "toy",
               "--checkpoint", os.path.join(toy_run, "model.qckpt"),
               "--split", "test", "--out", record_path])
    capsys.readouterr()
    assert rc == EXIT_OK
    record = read_json(record_path)
    # the same split, standardizer, and parameters reproduce the number exactly
    assert record["accuracy"] == summary["test_accuracy_best"]
    assert record["n_graphs"] == 12  # 60 toy graphs at a 0.2 test ratio


def test_eval_all_split(toy_run, capsys):
    rc = main(["eval", "--dataset", "toy",
               "--checkpoint", os.path.join(toy_run, "model.qckpt"),
               "--split", "all"])
    out = capsys.readouterr().out
    assert rc == EXIT_OK
    record = json.loads(out)
    assert record["n_graphs"] == 60
    assert 0.0 <= record["accuracy"] <= 1.0


def test_eval_missing_checkpoint(tmp_path):
    rc = main(["eval", "--dataset", "toy",
               "--checkpoint", str(tmp_path / "none.qckpt")])
    assert rc == EXIT_DATA


# ---- gradcheck ----------------------------------------------------------------------


def test_gradcheck_all_combinations_pass(tmp_path, capsys):
    report_path = str(tmp_path / "gradcheck.csv")
    rc = main(["gradcheck", "--out", report_path])
    out = capsys.readouterr().out
    assert rc == EXIT_OK
    assert "24/24 combinations passed" in out
    rows = read_csv(report_path)
    assert len(rows) == 1 + 24
    assert all(r[6] == "PASS" for r in rows[1:])
    assert max(float(r[3]) for r in rows[1:]) < 1e-4


def test_gradcheck_detects_corrupted_gradient(capsys):
    rc = main(["gradcheck", "--corrupt", "v1"])
    out = capsys.readouterr().out
    assert rc == EXIT_NUMERIC
    assert "FAIL" in out
    assert "v1" in out


# ---- sweep --------------------------------------------------------------------------


def test_sweep_f_mode_table(tmp_path, capsys):
    out = str(tmp_path / "sweep")
    rc = main(["sweep", "--dataset", "toy", "--sweep", "f-mode", "--out", out,
               "--epochs", "1", "--repeats", "1", "--layers", "4",
               "--batch-size", "16", "--seed", "3"])
    capsys.readouterr()
    assert rc == EXIT_OK

    spec = read_json(os.path.join(out, "sweep.json"))
    assert spec["sweep"] == "f-mode"
    assert spec["values"] == ["x0", "concat", "last"]

    rows = read_csv(os.path.join(out, "sweep.csv"))
    assert rows[0][0] == "value"
    assert [r[0] for r in rows[1:]] == ["x0", "concat", "last"]
    assert all(r[5] == "ok" for r in rows[1:])
    # all cells scored against the identical split
    assert len({r[4] for r in rows[1:]}) == 1


# ---- dataset loading ------------------------------------------------------------------


def test_load_dataset_toy():
    ds = load_dataset("toy")
    assert ds.size == 60
    assert ds.n_classes == 2


def test_load_dataset_tu_prefix_form(tu_writer):
    d = tu_writer("pref", [TRIANGLE, PATH4], [3, 4], [0, 1])
    by_dir = load_dataset(d)
    by_prefix = load_dataset(os.path.join(d, "pref"))
    assert by_dir.size == by_prefix.size == 2


def test_load_dataset_canonical_roundtrip(tmp_path):
    from qgcn.data import save_canonical, toy_triangles_vs_stars

    path = str(tmp_path / "toy.jsonl")
    save_canonical(toy_triangles_vs_stars(4), path)
    ds = load_dataset(path)
    assert ds.size == 8
    assert ds.name == "toy"
