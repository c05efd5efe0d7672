"""
Sentetik veri üretimi, etiket gürültüsü enjeksiyonu, weak/strong augmentation
ve dataset kalıcılığı.

Dizin düzeni (format "bin"):
  manifest.json      C, N, dim, gürültü bilgisi, seed'ler, standardizasyon, checksum'lar
  features.bin       little-endian float32, satır-öncelikli N x D_in
  true_labels.bin    little-endian uint16, N
  noisy_labels.bin   little-endian uint16, N
Format "csv": manifest.json + data.csv (başlık satırı, satır başına bir örnek).
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Literal, Sequence, Tuple

import numpy as np
import pandas as pd

from .helpers import DatasetFormatError, ValidationError, run_stream, sample_stream

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
NOISE_KINDS = ("none", "symmetric", "asymmetric")
SPLITS = ("train", "test")
MAX_ASYMMETRIC_RATE = 0.5

# run_stream anahtarları
_MEANS_STREAM = 1
_TRAIN_STREAM = 2
_TEST_STREAM = 3
_NOISE_STREAM = 4

NoiseKind = Literal["none", "symmetric", "asymmetric"]
View = Literal["weak", "strong"]


@dataclass
class NoiseSpec:
    """
    Args:
        kind: 'symmetric' | 'asymmetric' ('none' temiz veri).
        rate: Bozulma oranı n, [0, 1).
        seed: Gürültü seed'i.
    """
    kind: NoiseKind = "symmetric"
    rate: float = 0.4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in NOISE_KINDS:
            raise ValidationError(f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}")
        if not 0.0 <= self.rate < 1.0:
            raise ValidationError(f"noise rate must be in [0, 1), got {self.rate}")
        if self.kind == "asymmetric" and self.rate > MAX_ASYMMETRIC_RATE:
            raise ValidationError(f"asymmetric noise rate must be <= {MAX_ASYMMETRIC_RATE}, got {self.rate}")
        if self.seed < 0:
            raise ValidationError(f"seed must be >= 0, got {self.seed}")


@dataclass
class AugmentSpec:
    """
    Vektör verisi için augmentation.

    Args:
        weak_sigma: Weak görünüm Gauss gürültü ölçeği.
        strong_sigma: Strong görünüm Gauss ölçeği (>= weak_sigma).
        strong_dropout: Strong görünümde koordinat sıfırlama olasılığı, [0, 1).
    """
    weak_sigma: float = 0.05
    strong_sigma: float = 0.15
    strong_dropout: float = 0.2

    def __post_init__(self) -> None:
        if self.weak_sigma < 0:
            raise ValidationError(f"weak_sigma must be >= 0, got {self.weak_sigma}")
        if self.strong_sigma < self.weak_sigma:
            raise ValidationError("strong_sigma must be >= weak_sigma")
        if not 0.0 <= self.strong_dropout < 1.0:
            raise ValidationError(f"strong_dropout must be in [0, 1), got {self.strong_dropout}")


@dataclass
class BlobSpec:
    """
    Gauss blob üreteci parametreleri.

    Args:
        num_classes: C >= 2.
        per_class: Sınıf başına eğitim örneği.
        dim: Özellik boyutu >= 2.
        separation: Sınıf ortalamalarının küre yarıçapı.
        seed: Üretim seed'i.
        test_per_class: Sınıf başına test örneği.
    """
    num_classes: int = 10
    per_class: int = 500
    dim: int = 20
    separation: float = 4.0
    seed: int = 0
    test_per_class: int = 100

    def __post_init__(self) -> None:
        if self.num_classes < 2:
            raise ValidationError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.num_classes > np.iinfo(np.uint16).max + 1:
            raise ValidationError("num_classes does not fit the uint16 label format")
        if self.per_class < 1 or self.test_per_class < 0:
            raise ValidationError("per_class must be >= 1 and test_per_class >= 0")
        if self.dim < 2:
            raise ValidationError(f"dim must be >= 2, got {self.dim}")
        if self.separation < 0:
            raise ValidationError(f"separation must be >= 0, got {self.separation}")
        if self.seed < 0:
            raise ValidationError(f"seed must be >= 0, got {self.seed}")


@dataclass
class Dataset:
    """
    Args:
        features: (N, D_in) float32.
        true_labels: (N,) gerçek etiketler (yalnız değerlendirme).
        noisy_labels: (N,) verilen etiketler.
        split: 'train' | 'test'.
        num_classes: C.
        meta: Manifest bilgisi (generator, noise, standardization).
    """
    features: np.ndarray
    true_labels: np.ndarray
    noisy_labels: np.ndarray
    split: str
    num_classes: int
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.features = np.ascontiguousarray(self.features, dtype=np.float32)
        self.true_labels = np.asarray(self.true_labels, dtype=np.int64)
        self.noisy_labels = np.asarray(self.noisy_labels, dtype=np.int64)
        if self.split not in SPLITS:
            raise ValidationError(f"split must be one of {SPLITS}, got {self.split!r}")
        if self.features.ndim != 2:
            raise ValidationError(f"features must be 2-D, got shape {self.features.shape}")
        n = self.features.shape[0]
        if self.true_labels.shape != (n,) or self.noisy_labels.shape != (n,):
            raise ValidationError("label arrays must have one entry per feature row")
        for name, labels in (("true_labels", self.true_labels), ("noisy_labels", self.noisy_labels)):
            if n and (labels.min() < 0 or labels.max() >= self.num_classes):
                raise ValidationError(f"{name} outside [0, {self.num_classes})")
        if self.split == "test" and not np.array_equal(self.true_labels, self.noisy_labels):
            raise ValidationError("test split must carry accurate labels")

    @property
    def num_samples(self) -> int:
        return int(self.features.shape[0])

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])

    def with_noisy_labels(self, noisy_labels: np.ndarray, noise: Dict[str, Any]) -> "Dataset":
        meta = dict(self.meta)
        meta["noise"] = noise
        return Dataset(self.features, self.true_labels, noisy_labels, self.split, self.num_classes, meta)

    def equals(self, other: "Dataset") -> bool:
        """Alan alan birebir eşitlik (features bit düzeyinde)."""
        return (
            self.split == other.split
            and self.num_classes == other.num_classes
            and self.features.dtype == other.features.dtype
            and np.array_equal(self.features.view(np.uint32), other.features.view(np.uint32))
            and np.array_equal(self.true_labels, other.true_labels)
            and np.array_equal(self.noisy_labels, other.noisy_labels)
            and json.dumps(self.meta, sort_keys=True) == json.dumps(other.meta, sort_keys=True)
        )


# ----------------------------------------------------------------------------
# Üretim
# ----------------------------------------------------------------------------
def _blob_means(spec: BlobSpec) -> np.ndarray:
    rng = run_stream(spec.seed, _MEANS_STREAM)
    directions = rng.normal(size=(spec.num_classes, spec.dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return directions * spec.separation


def _draw(spec: BlobSpec, means: np.ndarray, per_class: int, stream: int) -> Tuple[np.ndarray, np.ndarray]:
    rng = run_stream(spec.seed, stream)
    labels = np.repeat(np.arange(spec.num_classes), per_class)
    order = rng.permutation(labels.shape[0])
    labels = labels[order]
    x = means[labels] + rng.normal(size=(labels.shape[0], spec.dim))
    return x, labels


def generate_blob_splits(spec: BlobSpec) -> Tuple[Dataset, Dataset]:
    """
    Aynı sınıf ortalamalarından temiz train ve test split'i üretir.

    Standardizasyon istatistikleri yalnız train split'ten hesaplanır ve test'e
    aynen uygulanır.

    Args:
        spec: Üretim parametreleri.

    Return:
        Tuple[Dataset, Dataset]: (train, test).
    """
    means = _blob_means(spec)
    x_train, y_train = _draw(spec, means, spec.per_class, _TRAIN_STREAM)
    mean = x_train.mean(axis=0)
    std = x_train.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    meta = {
        "generator": asdict(spec),
        "noise": {"kind": "none", "rate": 0.0, "seed": 0},
        "standardization": {"mean": mean.tolist(), "std": std.tolist()},
    }
    train = Dataset((x_train - mean) / std, y_train, y_train, "train", spec.num_classes, dict(meta))
    x_test, y_test = _draw(spec, means, spec.test_per_class, _TEST_STREAM)
    test = Dataset((x_test - mean) / std, y_test, y_test, "test", spec.num_classes, dict(meta))
    return train, test


def generate_blobs(num_classes: int, per_class: int, dim: int, separation: float, seed: int) -> Dataset:
    """
    Temiz train split'i üretir (generate_blob_splits'in train yarısı).
    """
    spec = BlobSpec(num_classes, per_class, dim, separation, seed, test_per_class=0)
    train, _ = generate_blob_splits(spec)
    return train


# ----------------------------------------------------------------------------
# Gürültü
# ----------------------------------------------------------------------------
def _check_noise_target(ds: Dataset, rate: float) -> None:
    if not 0.0 <= rate < 1.0:
        raise ValidationError(f"noise rate must be in [0, 1), got {rate}")
    if ds.split != "train":
        raise ValidationError("noise is injected into the train split only")


def inject_symmetric(ds: Dataset, rate: float, seed: int) -> Dataset:
    """
    Her örnek n olasılıkla bozulur; hedef, yanlış C-1 sınıf arasından uniform
    seçilir (her yanlış sınıf için n/(C-1)).

    Args:
        ds: Temiz train split.
        rate: n.
        seed: Gürültü seed'i.

    Return:
        Dataset: noisy_labels değişmiş kopya.
    """
    _check_noise_target(ds, rate)
    rng = run_stream(seed, _NOISE_STREAM)
    flip = rng.random(ds.num_samples) < rate
    offsets = rng.integers(1, ds.num_classes, size=ds.num_samples)
    noisy = np.where(flip, (ds.true_labels + offsets) % ds.num_classes, ds.true_labels)
    return ds.with_noisy_labels(noisy, {"kind": "symmetric", "rate": float(rate), "seed": int(seed)})


def inject_asymmetric(ds: Dataset, rate: float, seed: int) -> Dataset:
    """
    Her örnek n olasılıkla bir sonraki sınıfa bozulur; C-1 -> 0.
    """
    _check_noise_target(ds, rate)
    rng = run_stream(seed, _NOISE_STREAM)
    flip = rng.random(ds.num_samples) < rate
    noisy = np.where(flip, (ds.true_labels + 1) % ds.num_classes, ds.true_labels)
    return ds.with_noisy_labels(noisy, {"kind": "asymmetric", "rate": float(rate), "seed": int(seed)})


def inject_noise(ds: Dataset, spec: NoiseSpec) -> Dataset:
    """NoiseSpec'e göre uygun enjeksiyonu çağırır ve istatistikleri manifest'e yazar."""
    if spec.kind == "symmetric":
        out = inject_symmetric(ds, spec.rate, spec.seed)
    elif spec.kind == "asymmetric":
        out = inject_asymmetric(ds, spec.rate, spec.seed)
    else:
        out = ds.with_noisy_labels(ds.true_labels.copy(), {"kind": "none", "rate": 0.0, "seed": int(spec.seed)})
    report = noise_report(out)
    out.meta["noise"].update(empirical_rate=report["empirical_rate"], corrupted=report["corrupted"])
    return out


def noise_report(ds: Dataset) -> Dict[str, Any]:
    """
    Bozulma istatistikleri.

    Return:
        Dict[str, Any]: corrupted, empirical_rate ve (C x C) geçiş tablosu.
    """
    corrupted = int(np.count_nonzero(ds.noisy_labels != ds.true_labels))
    classes = pd.Index(range(ds.num_classes))
    transitions = (
        pd.crosstab(pd.Series(ds.true_labels, name="true"), pd.Series(ds.noisy_labels, name="noisy"))
        .reindex(index=classes, columns=classes, fill_value=0)
    )
    return {
        "corrupted": corrupted,
        "empirical_rate": corrupted / ds.num_samples if ds.num_samples else 0.0,
        "transitions": transitions,
    }


# ----------------------------------------------------------------------------
# Augmentation
# ----------------------------------------------------------------------------
def augment(x: np.ndarray, spec: AugmentSpec, view: View, rng: np.random.Generator) -> np.ndarray:
    """
    Args:
        x: (D_in,) girdi.
        spec: Augmentation ayarları.
        view: 'weak' | 'strong'.
        rng: Örneğe ait stream.

    Return:
        np.ndarray: float64 augment edilmiş vektör.
    """
    x = np.asarray(x, dtype=np.float64)
    if view == "weak":
        return x + rng.normal(0.0, spec.weak_sigma, size=x.shape)
    if view == "strong":
        out = x + rng.normal(0.0, spec.strong_sigma, size=x.shape)
        out[rng.random(x.shape) < spec.strong_dropout] = 0.0
        return out
    raise ValidationError(f"view must be 'weak' or 'strong', got {view!r}")


def augment_batch(
    features: np.ndarray,
    indices: Sequence[int],
    epoch: int,
    spec: AugmentSpec,
    view: View,
    seed: int,
) -> np.ndarray:
    """
    Batch'teki her örneği kendi (seed, index, epoch, view) stream'iyle augment eder.
    Sonuç batch sırasından bağımsızdır.
    """
    rows = np.asarray(features, dtype=np.float64)
    out = np.empty_like(rows)
    for row, idx in enumerate(indices):
        out[row] = augment(rows[row], spec, view, sample_stream(seed, int(idx), epoch, view))
    return out


# ----------------------------------------------------------------------------
# Kalıcılık
# ----------------------------------------------------------------------------
def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _manifest(ds: Dataset, fmt: str) -> Dict[str, Any]:
    return {
        "format_version": FORMAT_VERSION,
        "format": fmt,
        "split": ds.split,
        "num_classes": ds.num_classes,
        "num_samples": ds.num_samples,
        "dim": ds.dim,
        **ds.meta,
    }


def save_dataset(ds: Dataset, directory, fmt: str = "bin") -> Path:
    """
    Dataset'i dizine yazar.

    Args:
        ds: Dataset.
        directory: Hedef dizin (yoksa oluşturulur).
        fmt: 'bin' ya da 'csv'.

    Return:
        Path: Dizin yolu.
    """
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _manifest(ds, fmt)
    if fmt == "bin":
        files = {
            "features.bin": ds.features.astype("<f4").tobytes(order="C"),
            "true_labels.bin": ds.true_labels.astype("<u2").tobytes(),
            "noisy_labels.bin": ds.noisy_labels.astype("<u2").tobytes(),
        }
        for name, payload in files.items():
            (out / name).write_bytes(payload)
        manifest["checksums"] = {name: _sha256(out / name) for name in files}
    elif fmt == "csv":
        frame = pd.DataFrame(ds.features, columns=[f"x{i}" for i in range(ds.dim)])
        frame["true_label"] = ds.true_labels
        frame["noisy_label"] = ds.noisy_labels
        # %.9g float32'yi bit düzeyinde geri getirir
        frame.to_csv(out / "data.csv", index=False, float_format="%.9g")
        manifest["checksums"] = {"data.csv": _sha256(out / "data.csv")}
    else:
        raise ValidationError(f"format must be 'bin' or 'csv', got {fmt!r}")
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    logger.info("[data] saved %s split (%d x %d, %s) to %s", ds.split, ds.num_samples, ds.dim, fmt, out)
    return out


def _require(manifest: Dict[str, Any], key: str) -> Any:
    if key not in manifest:
        raise DatasetFormatError(f"manifest is missing field {key!r}")
    return manifest[key]


def _read_payload(directory: Path, name: str, checksums: Dict[str, str]) -> bytes:
    path = directory / name
    if not path.is_file():
        raise DatasetFormatError(f"missing dataset file {path}")
    payload = path.read_bytes()
    expected = checksums.get(name)
    if expected is None or hashlib.sha256(payload).hexdigest() != expected:
        raise DatasetFormatError(f"checksum failure for {path}")
    return payload


def load_dataset(directory) -> Dataset:
    """
    save_dataset çıktısını okur ve doğrular.

    Hatalar: eksik dosya, manifest/veri uzunluk uyuşmazlığı, checksum hatası,
    bilinmeyen manifest değeri (alan adıyla birlikte).
    """
    src = Path(directory)
    manifest_path = src / "manifest.json"
    if not manifest_path.is_file():
        raise DatasetFormatError(f"missing manifest {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as e:
        raise DatasetFormatError(f"manifest {manifest_path} is not valid JSON: {e}") from e

    version = _require(manifest, "format_version")
    if version != FORMAT_VERSION:
        raise DatasetFormatError(f"manifest field 'format_version' has unsupported value {version!r}")
    n = int(_require(manifest, "num_samples"))
    dim = int(_require(manifest, "dim"))
    num_classes = int(_require(manifest, "num_classes"))
    noise = _require(manifest, "noise")
    if not isinstance(noise, dict):
        raise DatasetFormatError(f"manifest field 'noise' must be a mapping, got {type(noise).__name__}")
    if noise.get("kind") not in NOISE_KINDS:
        raise DatasetFormatError(f"manifest field 'noise.kind' has unknown value {noise.get('kind')!r}")
    checksums = _require(manifest, "checksums")
    fmt = _require(manifest, "format")

    if fmt == "bin":
        feats = np.frombuffer(_read_payload(src, "features.bin", checksums), dtype="<f4")
        if feats.size != n * dim:
            raise DatasetFormatError(
                f"features.bin holds {feats.size} values, manifest says {n} x {dim}"
            )
        features = feats.reshape(n, dim).astype(np.float32)
        true_labels = np.frombuffer(_read_payload(src, "true_labels.bin", checksums), dtype="<u2")
        noisy_labels = np.frombuffer(_read_payload(src, "noisy_labels.bin", checksums), dtype="<u2")
    elif fmt == "csv":
        _read_payload(src, "data.csv", checksums)
        frame = pd.read_csv(src / "data.csv")
        feature_cols = [f"x{i}" for i in range(dim)]
        missing = [c for c in feature_cols + ["true_label", "noisy_label"] if c not in frame.columns]
        if missing:
            raise DatasetFormatError(f"data.csv is missing columns {missing}")
        if len(frame) != n:
            raise DatasetFormatError(f"data.csv has {len(frame)} rows, manifest says {n}")
        features = frame[feature_cols].to_numpy(dtype=np.float32)
        true_labels = frame["true_label"].to_numpy()
        noisy_labels = frame["noisy_label"].to_numpy()
    else:
        raise DatasetFormatError(f"manifest field 'format' has unknown value {fmt!r}")

    if true_labels.shape[0] != n or noisy_labels.shape[0] != n:
        raise DatasetFormatError(f"label files do not hold {n} entries")
    meta = {k: v for k, v in manifest.items()
            if k not in ("format_version", "format", "split", "num_classes", "num_samples", "dim", "checksums")}
    try:
        return Dataset(features, true_labels, noisy_labels, _require(manifest, "split"), num_classes, meta)
    except ValidationError as e:
        raise DatasetFormatError(f"invalid dataset in {src}: {e}") from e


def load_splits(directory) -> Tuple[Dataset, Dataset]:
    """Return: Tuple[Dataset, Dataset] — <dir>/train ve <dir>/test."""
    root = Path(directory)
    return load_dataset(root / "train"), load_dataset(root / "test")

