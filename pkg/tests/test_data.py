import sys
import os

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import hashlib
import json

import numpy as np
import pytest
from numpy.testing import assert_array_equal
from scipy.stats import chisquare

from npnkit.data import (
    AugmentSpec,
    BlobSpec,
    Dataset,
    NoiseSpec,
    augment,
    augment_batch,
    generate_blob_splits,
    generate_blobs,
    inject_asymmetric,
    inject_noise,
    inject_symmetric,
    load_dataset,
    load_splits,
    noise_report,
    save_dataset,
)
from npnkit.helpers import DatasetFormatError, ValidationError, sample_stream


def _labels_only(n, c, seed=0):
    """Gürültü istatistikleri için özellikleri önemsiz büyük bir train split."""
    labels = np.random.default_rng(seed).integers(0, c, size=n)
    return Dataset(np.zeros((n, 2), dtype=np.float32), labels, labels, "train", c)


# ---- generation ----

def test_same_seed_gives_identical_datasets():
    a = generate_blobs(4, 30, 5, 3.0, seed=11)
    b = generate_blobs(4, 30, 5, 3.0, seed=11)
    assert a.equals(b)
    assert not a.equals(generate_blobs(4, 30, 5, 3.0, seed=12))


def test_train_split_is_standardized():
    train, test = generate_blob_splits(BlobSpec(num_classes=3, per_class=200, dim=4, seed=1, test_per_class=50))
    assert np.abs(train.features.mean(axis=0)).max() < 1e-5
    assert np.abs(train.features.std(axis=0) - 1.0).max() < 1e-4
    assert test.num_samples == 150
    assert_array_equal(test.noisy_labels, test.true_labels)
    assert train.meta["standardization"] == test.meta["standardization"]


def test_well_separated_blobs_are_linearly_separable():
    train, test = generate_blob_splits(BlobSpec(num_classes=2, per_class=200, dim=20, separation=10.0, seed=2))
    # iki sınıf ortalamasının orta dikmesi bir doğrusal sınıflandırıcı
    mu0 = train.features[train.true_labels == 0].mean(axis=0)
    mu1 = train.features[train.true_labels == 1].mean(axis=0)
    w = mu1 - mu0
    b = -w @ (mu0 + mu1) / 2
    pred = (test.features @ w + b > 0).astype(int)
    assert (pred == test.true_labels).mean() >= 0.99


def test_zero_separation_gives_identical_class_means():
    train = generate_blobs(3, 400, 2, 0.0, seed=3)
    means = np.array([train.features[train.true_labels == c].mean(axis=0) for c in range(3)])
    assert np.abs(means - means.mean(axis=0)).max() < 0.2


def test_invalid_generator_parameters():
    with pytest.raises(ValidationError):
        BlobSpec(num_classes=1)
    with pytest.raises(ValidationError):
        BlobSpec(dim=1)
    with pytest.raises(ValidationError):
        BlobSpec(per_class=0)


# ---- noise ----

def test_zero_rate_leaves_labels_untouched():
    ds = _labels_only(1000, 5)
    assert_array_equal(inject_symmetric(ds, 0.0, 1).noisy_labels, ds.true_labels)
    assert_array_equal(inject_asymmetric(ds, 0.0, 1).noisy_labels, ds.true_labels)


@pytest.mark.parametrize("rate", [0.1, 0.2, 0.4, 0.8])
def test_symmetric_noise_rate_and_uniform_destinations(rate):
    c = 10
    ds = _labels_only(100_000, c)
    noisy = inject_symmetric(ds, rate, seed=4)
    flipped = noisy.noisy_labels != ds.true_labels
    assert abs(flipped.mean() - rate) <= 0.01
    offsets = (noisy.noisy_labels[flipped] - ds.true_labels[flipped]) % c
    observed = np.bincount(offsets, minlength=c)[1:]
    assert chisquare(observed).pvalue > 0.01
    assert_array_equal(noisy.features, ds.features)
    assert_array_equal(noisy.true_labels, ds.true_labels)


def test_two_class_symmetric_noise_flips_to_other_class():
    ds = _labels_only(100_000, 2)
    noisy = inject_symmetric(ds, 0.4, seed=5)
    flipped = noisy.noisy_labels != ds.true_labels
    assert abs(flipped.mean() - 0.4) <= 0.01
    assert_array_equal(noisy.noisy_labels[flipped], 1 - ds.true_labels[flipped])


def test_asymmetric_noise_goes_to_successor_class():
    c = 10
    ds = _labels_only(100_000, c)
    noisy = inject_asymmetric(ds, 0.4, seed=6)
    flipped = noisy.noisy_labels != ds.true_labels
    assert abs(flipped.mean() - 0.4) <= 0.01
    assert_array_equal(noisy.noisy_labels[flipped], (ds.true_labels[flipped] + 1) % c)
    last = flipped & (ds.true_labels == c - 1)
    assert last.any()
    assert np.all(noisy.noisy_labels[last] == 0)


def test_noise_rate_validation():
    ds = _labels_only(10, 3)
    with pytest.raises(ValidationError):
        inject_symmetric(ds, 1.0, 0)
    with pytest.raises(ValidationError):
        NoiseSpec(kind="asymmetric", rate=0.6)
    with pytest.raises(ValidationError):
        NoiseSpec(kind="pairflip")


def test_noise_needs_train_split():
    _, test = generate_blob_splits(BlobSpec(num_classes=3, per_class=10, dim=2, test_per_class=5))
    with pytest.raises(ValidationError):
        inject_symmetric(test, 0.2, 0)


def test_inject_noise_records_statistics():
    ds = _labels_only(5000, 4)
    noisy = inject_noise(ds, NoiseSpec("symmetric", 0.3, seed=7))
    report = noise_report(noisy)
    assert noisy.meta["noise"]["kind"] == "symmetric"
    assert noisy.meta["noise"]["corrupted"] == report["corrupted"]
    assert noisy.meta["noise"]["empirical_rate"] == pytest.approx(report["corrupted"] / 5000)
    transitions = report["transitions"]
    assert transitions.shape == (4, 4)
    assert int(transitions.to_numpy().sum()) == 5000
    assert int(transitions.to_numpy().trace()) == 5000 - report["corrupted"]


def test_inject_noise_zero_rate_reports_nothing_corrupted():
    noisy = inject_noise(_labels_only(100, 3), NoiseSpec("symmetric", 0.0))
    assert noisy.meta["noise"]["corrupted"] == 0


# ---- augmentation ----

def test_zero_sigma_weak_view_is_identity():
    x = np.arange(5, dtype=np.float64)
    spec = AugmentSpec(weak_sigma=0.0, strong_sigma=0.0, strong_dropout=0.0)
    assert_array_equal(augment(x, spec, "weak", sample_stream(0, 0, 0, "weak")), x)


def test_augment_replays_from_the_same_stream():
    x = np.ones(8)
    spec = AugmentSpec()
    a = augment(x, spec, "strong", sample_stream(3, 7, 2, "strong"))
    b = augment(x, spec, "strong", sample_stream(3, 7, 2, "strong"))
    assert_array_equal(a, b)
    assert not np.array_equal(a, augment(x, spec, "strong", sample_stream(3, 7, 3, "strong")))


def test_strong_view_drops_coordinates():
    x = np.full(10_000, 5.0)
    out = augment(x, AugmentSpec(0.0, 0.0, 0.3), "strong", sample_stream(0, 0, 0, "strong"))
    assert abs((out == 0.0).mean() - 0.3) < 0.02


def test_augment_batch_is_order_independent():
    feats = np.random.default_rng(0).normal(size=(6, 4))
    idx = np.array([10, 11, 12, 13, 14, 15])
    spec = AugmentSpec()
    forward = augment_batch(feats, idx, 4, spec, "weak", 9)
    backward = augment_batch(feats[::-1], idx[::-1], 4, spec, "weak", 9)
    assert_array_equal(forward, backward[::-1])


def test_augment_spec_validation():
    with pytest.raises(ValidationError):
        AugmentSpec(weak_sigma=0.2, strong_sigma=0.1)
    with pytest.raises(ValidationError):
        AugmentSpec(strong_dropout=1.0)
    with pytest.raises(ValidationError):
        augment(np.ones(2), AugmentSpec(), "medium", sample_stream(0, 0, 0, "weak"))


# ---- persistence ----

@pytest.fixture
def noisy_splits():
    train, test = generate_blob_splits(BlobSpec(num_classes=4, per_class=25, dim=3, seed=8, test_per_class=10))
    return inject_noise(train, NoiseSpec("symmetric", 0.4, seed=8)), test


@pytest.mark.parametrize("fmt", ["bin", "csv"])
def test_save_load_is_exact(tmp_path, noisy_splits, fmt):
    train, test = noisy_splits
    save_dataset(train, tmp_path / "train", fmt)
    save_dataset(test, tmp_path / "test", fmt)
    loaded_train, loaded_test = load_splits(tmp_path)
    assert loaded_train.equals(train)
    assert loaded_test.equals(test)


def test_manifest_row_count_mismatch(tmp_path, noisy_splits):
    save_dataset(noisy_splits[0], tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    manifest["num_samples"] += 1
    (tmp_path / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(DatasetFormatError):
        load_dataset(tmp_path)


def test_unknown_noise_kind_names_the_field(tmp_path, noisy_splits):
    save_dataset(noisy_splits[0], tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    manifest["noise"]["kind"] = "pairflip"
    (tmp_path / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(DatasetFormatError, match="noise.kind"):
        load_dataset(tmp_path)


def test_noise_field_must_be_a_mapping(tmp_path, noisy_splits):
    save_dataset(noisy_splits[0], tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    manifest["noise"] = "symmetric"
    (tmp_path / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(DatasetFormatError, match="'noise'"):
        load_dataset(tmp_path)


def test_checksum_failure(tmp_path, noisy_splits):
    save_dataset(noisy_splits[0], tmp_path)
    payload = bytearray((tmp_path / "noisy_labels.bin").read_bytes())
    payload[0] ^= 1
    (tmp_path / "noisy_labels.bin").write_bytes(bytes(payload))
    with pytest.raises(DatasetFormatError, match="checksum"):
        load_dataset(tmp_path)


def test_missing_files(tmp_path, noisy_splits):
    with pytest.raises(DatasetFormatError):
        load_dataset(tmp_path)
    save_dataset(noisy_splits[0], tmp_path)
    (tmp_path / "features.bin").unlink()
    with pytest.raises(DatasetFormatError):
        load_dataset(tmp_path)


def test_truncated_feature_file(tmp_path, noisy_splits):
    save_dataset(noisy_splits[0], tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    feats = (tmp_path / "features.bin").read_bytes()[:-12]
    (tmp_path / "features.bin").write_bytes(feats)
    manifest["checksums"]["features.bin"] = hashlib.sha256(feats).hexdigest()
    (tmp_path / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(DatasetFormatError, match="features.bin"):
        load_dataset(tmp_path)
