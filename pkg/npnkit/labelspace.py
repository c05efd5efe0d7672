"""
Etiket uzayı ayrıştırması

- Verilen (gürültülü) etiket + modelin en güvendiği sınıf -> aday küme (PLL).
- Aday kümenin tümleyeni -> tamamlayıcı küme (NL).
- Aday sayıları örnek başına histogramda birikir; histogramdan hard ve soft
  etiket çözümlemesi (disambiguation) türetilir.

Tekil fonksiyonlar (build_candidate_set, accumulate, disambiguate ...) tek
örnek üzerinde çalışır; HistogramStore ve *_batch fonksiyonları aynı kuralları
numpy ile toplu uygular. argmax eşitliklerinde en küçük sınıf indeksi kazanır.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .helpers import DimensionError, InvalidStateError, ValidationError

# olasılık toplamı toleransı
PROB_TOL = 1e-6


def one_hot(index: int, num_classes: int) -> np.ndarray:
    """
    Args:
        index: Sınıf indeksi.
        num_classes: C.

    Return:
        np.ndarray: Uzunluğu C olan int64 one-hot vektör.
    """
    if num_classes < 2:
        raise ValidationError(f"class count must be >= 2, got {num_classes}")
    if not 0 <= index < num_classes:
        raise ValidationError(f"class index {index} outside [0, {num_classes})")
    vec = np.zeros(num_classes, dtype=np.int64)
    vec[index] = 1
    return vec


def _as_one_hot(label: Sequence[int]) -> np.ndarray:
    vec = np.asarray(label, dtype=np.int64)
    if vec.ndim != 1 or vec.size < 2:
        raise DimensionError(f"label vector must be 1-D with C >= 2, got shape {vec.shape}")
    if vec.min() < 0 or vec.sum() != 1:
        raise ValidationError(f"noisy label must be one-hot, got {vec.tolist()}")
    return vec


def topk_indices(probs: np.ndarray, k: int) -> np.ndarray:
    """
    Her satır için en yüksek k olasılığın sınıf indeksleri.

    Stable sıralama kullanılır; eşit olasılıklarda küçük indeks önce gelir.

    Args:
        probs: (B, C) olasılıklar.
        k: 1 <= k < C.

    Return:
        np.ndarray: (B, k) int64 indeksler.
    """
    probs = np.atleast_2d(probs)
    if not 1 <= k < probs.shape[1]:
        raise ValidationError(f"top-k must satisfy 1 <= k < C, got k={k}, C={probs.shape[1]}")
    if k == 1:
        return np.argmax(probs, axis=1)[:, None]
    return np.argsort(-probs, axis=1, kind="stable")[:, :k]


@dataclass(frozen=True)
class CandidateSet:
    """
    Bir örneğin bu epoch'taki aday etiketleri.

    Args:
        counts: y + ŷ toplamı (tahmin etiketle aynıysa tek sınıfta 2).
    """
    counts: np.ndarray

    @property
    def membership(self) -> np.ndarray:
        """Return: np.ndarray — counts > 0 boolean görünümü."""
        return self.counts > 0

    @property
    def num_classes(self) -> int:
        return int(self.counts.shape[0])


@dataclass(frozen=True)
class ComplementarySet:
    """Aday kümenin tümleyeni; NL kaybına giren sınıflar."""
    membership: np.ndarray


@dataclass
class CandidateHistogram:
    """
    Örnek başına aday sayılarının birikimi.

    Args:
        counts: Uzunluğu C olan sayaç.
        epochs_observed: Kaç birikim adımı uygulandığı (t).
    """
    counts: np.ndarray
    epochs_observed: int = 0

    @classmethod
    def from_label(cls, noisy_label: Sequence[int]) -> "CandidateHistogram":
        """t=0 histogramı: verilen one-hot etiketin kendisi."""
        return cls(counts=_as_one_hot(noisy_label).copy(), epochs_observed=0)


@dataclass(frozen=True)
class Disambiguation:
    """
    Histogramdan türetilen hard ve soft etiket.

    Args:
        hard_label: argmax(counts), eşitlikte en küçük indeks.
        hard_weight: max(counts) / sum(counts).
        soft_label: counts / sum(counts).
    """
    hard_label: int
    hard_weight: float
    soft_label: np.ndarray


def build_candidate_set(noisy_label: Sequence[int], probs: Sequence[float], topk: int = 1) -> CandidateSet:
    """
    Aday kümeyi oluşturur: counts = y + one_hot(argmax p).

    Args:
        noisy_label: One-hot verilen etiket.
        probs: Softmax olasılıkları (uzunluk C).
        topk: Tahminden eklenecek sınıf sayısı (yöntem 1 kullanır).

    Return:
        CandidateSet: Aday sayıları.
    """
    y = _as_one_hot(noisy_label)
    p = np.asarray(probs, dtype=np.float64)
    if p.shape != y.shape:
        raise DimensionError(f"label has {y.shape[0]} classes but probs has shape {p.shape}")
    if p.min() < 0.0 or p.max() > 1.0 or abs(p.sum() - 1.0) > PROB_TOL:
        raise ValidationError(f"probs must lie in [0, 1] and sum to 1, got sum {p.sum():.8f}")
    counts = y.copy()
    for k in topk_indices(p[None, :], topk)[0]:
        counts[k] += 1
    return CandidateSet(counts=counts)


def build_complementary_set(candidate: CandidateSet) -> ComplementarySet:
    """Return: ComplementarySet — aday üyeliğinin birebir değili."""
    return ComplementarySet(membership=~candidate.membership)


def accumulate(hist: CandidateHistogram, candidate: CandidateSet) -> CandidateHistogram:
    """
    S^t = S^{t-1} + Y^t.

    Args:
        hist: Önceki histogram.
        candidate: Bu epoch'un aday kümesi.

    Return:
        CandidateHistogram: Yeni histogram (girdi değişmez).
    """
    if hist.counts.shape != candidate.counts.shape:
        raise DimensionError(
            f"histogram has shape {hist.counts.shape}, candidate has {candidate.counts.shape}"
        )
    if candidate.counts.min() < 0 or candidate.counts.sum() < 2:
        raise InvalidStateError(f"candidate counts {candidate.counts.tolist()} are not a valid candidate set")
    return CandidateHistogram(
        counts=hist.counts + candidate.counts,
        epochs_observed=hist.epochs_observed + 1,
    )


def disambiguate(hist: CandidateHistogram) -> Disambiguation:
    """
    Hard (argmax + ağırlık) ve soft (normalize sayılar) etiketleri hesapla.
    """
    counts = np.asarray(hist.counts, dtype=np.int64)
    total = int(counts.sum())
    if total < 1:
        raise InvalidStateError("cannot disambiguate an all-zero histogram")
    hard = int(np.argmax(counts))
    return Disambiguation(
        hard_label=hard,
        hard_weight=float(counts[hard]) / total,
        soft_label=counts / float(total),
    )


# ----------------------------------------------------------------------------
# Toplu (batch) sürümler
# ----------------------------------------------------------------------------
def build_candidates_batch(noisy_labels: np.ndarray, probs: np.ndarray, topk: int = 1) -> np.ndarray:
    """
    Args:
        noisy_labels: (B,) sınıf indeksleri.
        probs: (B, C) olasılıklar.
        topk: Tahminden eklenecek sınıf sayısı.

    Return:
        np.ndarray: (B, C) int64 aday sayıları.
    """
    noisy_labels = np.asarray(noisy_labels, dtype=np.int64)
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[0] != noisy_labels.shape[0]:
        raise DimensionError(f"labels {noisy_labels.shape} and probs {probs.shape} do not align")
    rows = np.arange(noisy_labels.shape[0])
    counts = np.zeros(probs.shape, dtype=np.int64)
    counts[rows, noisy_labels] += 1
    for col in topk_indices(probs, topk).T:
        counts[rows, col] += 1
    return counts


def complementary_batch(candidate_counts: np.ndarray) -> np.ndarray:
    """Return: np.ndarray — (B, C) boolean tümleyen üyelik."""
    return ~(np.asarray(candidate_counts) > 0)


def random_complementary_batch(
    noisy_labels: np.ndarray,
    num_classes: int,
    rngs: Sequence[np.random.Generator],
) -> np.ndarray:
    """
    Karşılaştırma için: verilen etiket dışındaki sınıflardan rastgele tek bir
    tamamlayıcı etiket seçer.

    Args:
        noisy_labels: (B,) verilen etiketler.
        num_classes: C.
        rngs: Her örnek için ayrı üreteç.

    Return:
        np.ndarray: (B, C) boolean üyelik, her satırda tek True.
    """
    noisy_labels = np.asarray(noisy_labels, dtype=np.int64)
    if len(rngs) != noisy_labels.shape[0]:
        raise DimensionError(f"{len(rngs)} rng streams for {noisy_labels.shape[0]} samples")
    out = np.zeros((noisy_labels.shape[0], num_classes), dtype=bool)
    for row, (label, rng) in enumerate(zip(noisy_labels, rngs)):
        offset = int(rng.integers(1, num_classes))
        out[row, (label + offset) % num_classes] = True
    return out


@dataclass
class HistogramStore:
    """
    Tüm eğitim örneklerinin aday histogramları.

    Epoch içinde tek yazar tarafından güncellenir; snapshot() epoch'lar arası
    okuma içindir.

    Args:
        counts: (N, C) int64 sayaçlar.
        epochs_observed: (N,) örnek başına birikim adımı.
    """
    counts: np.ndarray
    epochs_observed: np.ndarray = field(default=None)

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[1] < 2:
            raise DimensionError(f"histogram store must be (N, C>=2), got {self.counts.shape}")
        if self.epochs_observed is None:
            self.epochs_observed = np.zeros(self.counts.shape[0], dtype=np.int64)
        self.epochs_observed = np.asarray(self.epochs_observed, dtype=np.int64)
        if self.epochs_observed.shape != (self.counts.shape[0],):
            raise DimensionError("epochs_observed must have one entry per sample")

    @classmethod
    def from_noisy_labels(cls, noisy_labels: np.ndarray, num_classes: int) -> "HistogramStore":
        """t=0: her satır verilen etiketin one-hot hali."""
        noisy_labels = np.asarray(noisy_labels, dtype=np.int64)
        counts = np.zeros((noisy_labels.shape[0], num_classes), dtype=np.int64)
        counts[np.arange(noisy_labels.shape[0]), noisy_labels] = 1
        return cls(counts=counts)

    @property
    def num_samples(self) -> int:
        return int(self.counts.shape[0])

    @property
    def num_classes(self) -> int:
        return int(self.counts.shape[1])

    def histogram(self, index: int) -> CandidateHistogram:
        """Return: CandidateHistogram — tek örneğin kopyası."""
        if not 0 <= index < self.num_samples:
            raise ValidationError(f"sample index {index} outside [0, {self.num_samples})")
        return CandidateHistogram(self.counts[index].copy(), int(self.epochs_observed[index]))

    def accumulate_batch(self, indices: np.ndarray, candidate_counts: np.ndarray) -> None:
        """
        Verilen örneklerin histogramlarına aday sayılarını ekler.

        Args:
            indices: (B,) benzersiz örnek indeksleri.
            candidate_counts: (B, C) aday sayıları.
        """
        indices = np.asarray(indices, dtype=np.int64)
        candidate_counts = np.asarray(candidate_counts, dtype=np.int64)
        if candidate_counts.shape != (indices.shape[0], self.num_classes):
            raise DimensionError(
                f"candidate batch {candidate_counts.shape} does not match "
                f"({indices.shape[0]}, {self.num_classes})"
            )
        if np.any(candidate_counts.sum(axis=1) < 2):
            raise InvalidStateError("every candidate row must hold the given label and a prediction")
        self.counts[indices] += candidate_counts
        self.epochs_observed[indices] += 1

    def disambiguate_batch(self, indices: Optional[np.ndarray] = None):
        """
        Args:
            indices: İstenen örnekler; None ise tümü.

        Return:
            tuple: (hard_labels (B,), hard_weights (B,), soft_labels (B, C)).
        """
        counts = self.counts if indices is None else self.counts[np.asarray(indices, dtype=np.int64)]
        totals = counts.sum(axis=1)
        if np.any(totals < 1):
            raise InvalidStateError("cannot disambiguate an all-zero histogram")
        hard = np.argmax(counts, axis=1)
        weights = counts[np.arange(counts.shape[0]), hard] / totals.astype(np.float64)
        soft = counts / totals[:, None].astype(np.float64)
        return hard, weights, soft

    def snapshot(self) -> "HistogramStore":
        return HistogramStore(self.counts.copy(), self.epochs_observed.copy())
