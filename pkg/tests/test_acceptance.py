"""
Uçtan uca davranış: blobs(C=10, dim=20), %40 simetrik gürültü, 60 epoch (15 warm-up), 3 seed.

Yavaş; `pytest -m slow` ile çalıştırılır.
"""
import sys
import os

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import numpy as np
import pytest

from npnkit.data import BlobSpec, NoiseSpec, generate_blob_splits, inject_noise
from npnkit.trainer import TrainConfig, train

pytestmark = pytest.mark.slow

SEEDS = (0, 1, 2)
RATE = 0.4
C = 10

VARIANTS = {
    "standard": dict(method="standard"),
    "nl": dict(mode="given", alpha=1.0, beta=0.0),
    "nl_pll": dict(mode="hard", alpha=1.0, beta=0.0),
    "hard": dict(mode="hard", alpha=1.0, beta=2.0),
    "soft": dict(mode="soft", alpha=1.0, beta=2.0),
}


def _splits(seed):
    train_ds, test_ds = generate_blob_splits(
        BlobSpec(num_classes=C, per_class=500, dim=20, seed=seed, test_per_class=100)
    )
    return inject_noise(train_ds, NoiseSpec("symmetric", RATE, seed=seed)), test_ds


def _cfg(seed, **kw):
    return TrainConfig(total_epochs=60, warmup_epochs=15, batch_size=64, seed=seed, checkpoint_every=0, **kw)


@pytest.fixture(scope="module")
def results():
    out = {name: [] for name in VARIANTS}
    for seed in SEEDS:
        splits = _splits(seed)
        for name, kw in VARIANTS.items():
            out[name].append(train(_cfg(seed, **kw), *splits, run_name=f"{name}-{seed}"))
    return out


def _mean_acc(runs):
    return float(np.mean([r.summary["last10_mean_acc"] for r in runs]))


def test_npn_beats_standard(results):
    assert _mean_acc(results["hard"]) >= _mean_acc(results["standard"]) + 5.0


def test_ingredients_add_up(results):
    std, nl, nl_pll, full = (_mean_acc(results[k]) for k in ("standard", "nl", "nl_pll", "hard"))
    assert std < nl + 0.5
    assert nl <= nl_pll + 0.5
    assert nl_pll <= full + 0.5


def test_candidates_recover_truth(results):
    floor = 100.0 * (1 - RATE + RATE / C)
    for run in results["hard"]:
        end_of_warmup = run.metrics.iloc[14]
        assert end_of_warmup["phase"] == "warmup"
        assert end_of_warmup["hit_rate"] > floor + 10.0


def test_precision_stays_at_clean_fraction(results):
    # tek tahminli aday kümede verilen etiket her epoch oy alır; argmax hep o
    for seed, run in zip(SEEDS, results["hard"]):
        noisy, _ = _splits(seed)
        clean = 100.0 * np.mean(noisy.noisy_labels == noisy.true_labels)
        assert run.metrics["disamb_precision"].iloc[-1] == pytest.approx(clean)


def test_hard_and_soft_both_beat_standard(results):
    std = _mean_acc(results["standard"])
    assert _mean_acc(results["hard"]) >= std + 5.0
    assert _mean_acc(results["soft"]) >= std + 5.0


def test_soft_leads_hard(results):
    # hard hedef = verilen etiket; soft hedef tahmin oylarını da taşır
    assert _mean_acc(results["soft"]) >= _mean_acc(results["hard"])


def test_reruns_are_byte_identical(tmp_path):
    splits = _splits(0)
    train(_cfg(0), *splits, out_dir=tmp_path / "a")
    train(_cfg(0), *splits, out_dir=tmp_path / "b")
    assert (tmp_path / "a" / "metrics.csv").read_bytes() == (tmp_path / "b" / "metrics.csv").read_bytes()
