import sys
import os

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import json

import numpy as np
import pandas as pd
import pytest

import npnkit.adapters
import npnkit.trainer
from npnkit.adapters import METRICS_COLUMNS
from npnkit.checkpoint import TrainingCheckpoint
from npnkit.data import Dataset
from npnkit.labelspace import HistogramStore
from npnkit.main import EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION, inspect_samples, main
from npnkit.model import MlpNetwork, OptimizerState

GEN = ["gen-data", "--classes", "3", "--per-class", "20", "--test-per-class", "5", "--dim", "4",
       "--noise", "symmetric", "--rate", "0.4", "--seed", "1"]
TINY = ["--epochs", "3", "--warmup", "1", "--batch-size", "16", "--hidden", "8", "--seed", "2"]


@pytest.fixture(autouse=True)
def out_root(tmp_path, monkeypatch):
    monkeypatch.setenv("NPN_OUT", str(tmp_path / "runs"))
    return tmp_path / "runs"


@pytest.fixture
def data_dir(tmp_path, capsys):
    d = tmp_path / "data"
    assert main(GEN + ["--out", str(d)]) == EXIT_OK
    capsys.readouterr()
    return d


@pytest.fixture
def trained(tmp_path, data_dir, capsys):
    run = tmp_path / "run"
    assert main(["train", "--data", str(data_dir), "--checkpoint-every", "1", "--out", str(run)] + TINY) == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    return run, summary


# ---- gen-data ----

def test_gen_data_writes_both_splits(tmp_path, capsys):
    d = tmp_path / "d"
    assert main(GEN + ["--out", str(d)]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["samples"] == 60
    assert report["kind"] == "symmetric"
    for split in ("train", "test"):
        assert (d / split / "manifest.json").is_file()
    assert (d / "config.json").is_file()
    assert not (d / "FAILED").exists()


def test_gen_data_zero_rate(tmp_path, capsys):
    assert main(GEN[:-4] + ["--rate", "0", "--out", str(tmp_path / "d")]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["corrupted"] == 0


def test_gen_data_rejects_large_asymmetric_rate(tmp_path):
    assert main(["gen-data", "--noise", "asymmetric", "--rate", "0.6", "--out", str(tmp_path / "d")]) == EXIT_VALIDATION
    assert not (tmp_path / "d").exists()


def test_gen_data_without_out_uses_timestamped_root(out_root, capsys):
    assert main(GEN) == EXIT_OK
    (run,) = out_root.iterdir()
    assert run.name.endswith("-1-data")


def test_unknown_flag():
    assert main(["gen-data", "--colour", "red"]) == EXIT_VALIDATION
    assert main([]) == EXIT_VALIDATION


# ---- train ----

def test_train_writes_artifacts(trained):
    run, summary = trained
    for name in ("config.json", "metrics.csv", "summary.json", "train.log"):
        assert (run / name).is_file()
    assert sorted(p.name for p in (run / "checkpoints").iterdir()) == [
        "checkpoint-0001.npnc", "checkpoint-0002.npnc", "checkpoint-0003.npnc",
    ]
    frame = pd.read_csv(run / "metrics.csv")
    assert list(frame.columns) == list(METRICS_COLUMNS)
    assert frame["phase"].tolist() == ["warmup", "robust", "robust"]
    assert summary["epochs"] == 3
    assert not (run / "FAILED").exists()


def test_train_refuses_non_empty_directory(trained, data_dir):
    run, _ = trained
    assert main(["train", "--data", str(data_dir), "--out", str(run)] + TINY) == EXIT_VALIDATION
    assert not (run / "FAILED").exists()


def test_runtime_failure_leaves_marker(tmp_path, data_dir, monkeypatch):
    def broken(*args, **kwargs):
        raise RuntimeError("out of memory")

    monkeypatch.setattr(npnkit.trainer, "train", broken)
    run = tmp_path / "run"
    assert main(["train", "--data", str(data_dir), "--out", str(run)] + TINY) == EXIT_RUNTIME
    assert "out of memory" in (run / "FAILED").read_text()


def test_validation_failure_after_start_leaves_marker(tmp_path, data_dir):
    run = tmp_path / "run"
    assert main(["train", "--data", str(data_dir), "--topk", "3", "--out", str(run)] + TINY) == EXIT_VALIDATION
    assert (run / "FAILED").is_file()


def test_missing_dataset(tmp_path):
    assert main(["train", "--data", str(tmp_path / "none")] + TINY) == EXIT_VALIDATION


# ---- eval / inspect ----

def test_eval_matches_final_accuracy(trained, data_dir, capsys):
    run, summary = trained
    ckpt = run / "checkpoints" / "checkpoint-0003.npnc"
    assert main(["eval", "--checkpoint", str(ckpt), "--data", str(data_dir)]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["accuracy"] == pytest.approx(summary["final_acc"])
    assert report["samples"] == 15 and report["epoch"] == 3


def test_eval_csv_format(trained, data_dir, capsys):
    run, _ = trained
    ckpt = run / "checkpoints" / "checkpoint-0003.npnc"
    assert main(["eval", "--checkpoint", str(ckpt), "--data", str(data_dir), "--format", "csv"]) == EXIT_OK
    header = capsys.readouterr().out.splitlines()[0]
    assert "accuracy" in header.split(",")


def test_eval_missing_checkpoint(tmp_path, data_dir):
    assert main(["eval", "--checkpoint", str(tmp_path / "x.npnc"), "--data", str(data_dir)]) == EXIT_VALIDATION


def test_inspect_reports_histograms(trained, data_dir, capsys):
    run, _ = trained
    ckpt = run / "checkpoints" / "checkpoint-0003.npnc"
    assert main(["inspect", "--checkpoint", str(ckpt), "--data", str(data_dir), "--index", "0", "--index", "5"]) == EXIT_OK
    rows = json.loads(capsys.readouterr().out)
    assert [r["index"] for r in rows] == [0, 5]
    for r in rows:
        assert sum(r["counts"]) == 1 + 2 * 3
        assert r["epochs_observed"] == 3
        assert r["noisy_label"] in r["candidates"]
        assert set(r["candidates"]).isdisjoint(r["complementary"])
        assert sum(r["soft_label"]) == pytest.approx(1.0)


def test_inspect_samples_traced_histogram():
    ds = Dataset(np.zeros((2, 3)), [1, 2], [1, 2], "train", 4)
    net = MlpNetwork([3, 4])
    ckpt = TrainingCheckpoint(
        epoch=1, seed=0, layer_dims=net.layer_dims, params=net.parameters(),
        buffers=OptimizerState.for_network(net).buffers, opt_step=0, momentum=0.9,
        histograms=HistogramStore(np.array([[0, 3, 2, 0], [0, 0, 3, 0]]), np.array([1, 1])),
        config={"candidate_topk": 1},
    )
    (row,) = inspect_samples(ckpt, ds, [0])
    assert row["hard_label"] == 1
    assert row["hard_weight"] == pytest.approx(0.6)
    assert row["soft_label"] == pytest.approx([0.0, 0.6, 0.4, 0.0])
    # sıfır ağ: uniform tahmin, argmax 0
    assert row["candidates"] == [0, 1]
    assert row["complementary"] == [2, 3]


def test_inspect_all_as_csv(trained, data_dir, capsys):
    run, _ = trained
    ckpt = run / "checkpoints" / "checkpoint-0003.npnc"
    assert main(["inspect", "--checkpoint", str(ckpt), "--data", str(data_dir), "--all", "--format", "csv"]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("index,noisy_label,true_label,counts")
    assert len(lines) == 1 + 60


def test_inspect_rejects_negative_index(trained, data_dir):
    run, _ = trained
    ckpt = run / "checkpoints" / "checkpoint-0001.npnc"
    assert main(["inspect", "--checkpoint", str(ckpt), "--data", str(data_dir), "--index", "-1"]) == EXIT_VALIDATION


def test_inspect_needs_indices(trained, data_dir):
    run, _ = trained
    ckpt = run / "checkpoints" / "checkpoint-0001.npnc"
    assert main(["inspect", "--checkpoint", str(ckpt), "--data", str(data_dir)]) == EXIT_VALIDATION


# ---- sweep / ablate ----

def test_sweep_writes_one_row_per_cell(tmp_path, data_dir, capsys):
    out = tmp_path / "sweep"
    code = main(["sweep", "--data", str(data_dir), "--alpha", "0,1", "--beta", "2", "--out", str(out)] + TINY)
    assert code == EXIT_OK
    frame = pd.read_csv(out / "sweep.csv")
    assert frame[["alpha", "beta", "topk"]].values.tolist() == [[0.0, 2.0, 1], [1.0, 2.0, 1]]
    assert (out / "alpha0-beta2-topk1" / "metrics.csv").is_file()
    assert len(json.loads(capsys.readouterr().out)) == 2


def test_sweep_empty_grid(tmp_path, data_dir):
    assert main(["sweep", "--data", str(data_dir), "--alpha", "", "--out", str(tmp_path / "s")] + TINY) == EXIT_VALIDATION


def test_ablate_table(tmp_path, data_dir, capsys):
    out = tmp_path / "ablate"
    assert main(["ablate", "--data", str(data_dir), "--seeds", "0", "--out", str(out)] + TINY) == EXIT_OK
    table = pd.read_csv(out / "ablation.csv")
    assert table["ingredients"].tolist() == ["Standard", "+NL", "+NL+PLL", "+NL+PLL+CR"]
    assert (table["seeds"] == 1).all()
    runs = pd.read_csv(out / "ablation_runs.csv")
    assert len(runs) == 4
    capsys.readouterr()


def test_failed_metrics_write_leaves_marker(tmp_path, data_dir, monkeypatch):
    def broken(self, payload):
        raise OSError("disk full")

    monkeypatch.setattr(npnkit.adapters.CsvMetricsSink, "append", broken)
    run = tmp_path / "run"
    assert main(["train", "--data", str(data_dir), "--out", str(run)] + TINY) == EXIT_RUNTIME
    assert "disk full" in (run / "FAILED").read_text()
