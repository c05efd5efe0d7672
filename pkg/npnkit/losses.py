"""
Kayıp fonksiyonları

Hepsi softmax olasılıklarını alır, batch ortalaması döndürür ve softmax
öncesi logit'lere göre analitik gradyanı birlikte verir. log içindeki her
olasılık [EPS, 1-EPS] aralığına kırpılır; kırpılan terimlerin gradyanı sıfırdır.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .helpers import DimensionError, ValidationError


EPS = 1e-12


@dataclass
class LossOutput:
    """
    Args:
        value: Batch ortalaması kayıp.
        grad_logits: (B, C) logit gradyanı.
    """
    value: float
    grad_logits: np.ndarray


@dataclass
class LossWeights:
    """L = L_PLL + alpha * L_NL + beta * L_REG ağırlıkları."""
    alpha: float = 1.0
    beta: float = 2.0

    def __post_init__(self) -> None:
        if self.alpha < 0 or self.beta < 0:
            raise ValidationError(f"loss weights must be >= 0, got alpha={self.alpha}, beta={self.beta}")


def softmax(logits: np.ndarray) -> np.ndarray:
    """Satır bazında softmax; taşmayı önlemek için satır maksimumu çıkarılır."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _check_probs(probs: np.ndarray) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 2 or p.shape[1] < 2:
        raise DimensionError(f"probs must be (B, C>=2), got shape {p.shape}")
    if p.shape[0] == 0:
        raise DimensionError("empty batch")
    return p


def _targets(labels, num_rows: int, num_classes: int) -> np.ndarray:
    """Sınıf indeksi (B,) ya da one-hot/soft (B, C) girdiyi (B, C) float hedefe çevirir."""
    t = np.asarray(labels)
    if t.ndim == 1:
        if t.shape[0] != num_rows:
            raise DimensionError(f"{t.shape[0]} labels for {num_rows} rows")
        idx = t.astype(np.int64)
        if idx.min() < 0 or idx.max() >= num_classes:
            raise ValidationError(f"labels outside [0, {num_classes})")
        out = np.zeros((num_rows, num_classes), dtype=np.float64)
        out[np.arange(num_rows), idx] = 1.0
        return out
    if t.shape != (num_rows, num_classes):
        raise DimensionError(f"targets shape {t.shape} != probs shape {(num_rows, num_classes)}")
    return t.astype(np.float64)


def _weighted_cross_entropy(p: np.ndarray, targets: np.ndarray, weights: Optional[np.ndarray] = None) -> LossOutput:
    """
    -(1/B) Σ_n w_n Σ_c q_nc log p_nc ve logit gradyanı.

    d/dz_j = w (p_j Σ_c q_c a_c - q_j a_j) / B; a, kırpılmamış terimlerin maskesi.
    """
    n = p.shape[0]
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != (n,):
        raise DimensionError(f"{w.shape} weights for {n} rows")
    clipped = np.clip(p, EPS, 1.0 - EPS)
    active = (p > EPS) & (p < 1.0 - EPS)
    per_sample = -(targets * np.log(clipped)).sum(axis=1)
    qa = targets * active
    grad = p * qa.sum(axis=1, keepdims=True) - qa
    return LossOutput(
        value=float((w * per_sample).sum() / n),
        grad_logits=grad * (w / n)[:, None],
    )


def ce_loss(probs: np.ndarray, labels) -> LossOutput:
    """
    Standart cross-entropy.

    Args:
        probs: (B, C) olasılıklar.
        labels: (B,) sınıf indeksleri ya da (B, C) one-hot.

    Return:
        LossOutput: Değer ve gradyan.
    """
    p = _check_probs(probs)
    return _weighted_cross_entropy(p, _targets(labels, *p.shape))


def pll_hard_loss(probs: np.ndarray, hard_labels, hard_weights) -> LossOutput:
    """
    Hard çözümlenmiş etikete, histogram güven ağırlığıyla cross-entropy.

    Args:
        probs: (B, C) olasılıklar.
        hard_labels: (B,) argmax etiketleri.
        hard_weights: (B,) max/sum ağırlıkları.
    """
    p = _check_probs(probs)
    return _weighted_cross_entropy(p, _targets(hard_labels, *p.shape), hard_weights)


def pll_soft_loss(probs: np.ndarray, soft_labels: np.ndarray) -> LossOutput:
    """Normalize histograma (soft hedef) karşı cross-entropy."""
    p = _check_probs(probs)
    return _weighted_cross_entropy(p, _targets(soft_labels, *p.shape))


def nl_loss(probs: np.ndarray, complementary: np.ndarray) -> LossOutput:
    """
    Negatif öğrenme: -(1/B) Σ_n Σ_{c ∈ Ỹ_n} log(1 - p_nc).

    Boş tamamlayıcı küme 0 katkı verir. Gradyan, r_c = m_c p_c / (1 - p_c)
    ile d/dz_j = r_j - p_j Σ_c r_c.

    Args:
        probs: (B, C) olasılıklar.
        complementary: (B, C) boolean üyelik.
    """
    p = _check_probs(probs)
    m = np.asarray(complementary)
    if m.shape != p.shape:
        raise DimensionError(f"complementary shape {m.shape} != probs shape {p.shape}")
    m = m.astype(np.float64)
    n = p.shape[0]
    one_minus = 1.0 - p
    clipped = np.clip(one_minus, EPS, 1.0 - EPS)
    active = (one_minus > EPS) & (one_minus < 1.0 - EPS)
    per_sample = -(m * np.log(clipped)).sum(axis=1)
    r = m * active * p / clipped
    grad = r - p * r.sum(axis=1, keepdims=True)
    return LossOutput(value=float(per_sample.sum() / n), grad_logits=grad / n)


def reg_loss(strong_probs: np.ndarray, weak_pseudo) -> LossOutput:
    """
    Tutarlılık düzenlemesi: güçlü görünüm, zayıf görünümün argmax sözde
    etiketine karşı cross-entropy. Sözde etiket sabittir (gradyan akmaz).
    """
    p = _check_probs(strong_probs)
    return _weighted_cross_entropy(p, _targets(weak_pseudo, *p.shape))


def combined_loss(pll: LossOutput, nl: LossOutput, reg: LossOutput, w: LossWeights) -> LossOutput:
    """
    L = L_PLL + alpha * L_NL + beta * L_REG.

    Bileşen gradyanları aynı şekilde olmalı (trainer weak/strong satırlarını
    sıfırla doldurup aynı (2B, C) şekle getirir).
    """
    shapes = {pll.grad_logits.shape, nl.grad_logits.shape, reg.grad_logits.shape}
    if len(shapes) != 1:
        raise DimensionError(f"component gradients disagree in shape: {sorted(shapes)}")
    return LossOutput(
        value=pll.value + w.alpha * nl.value + w.beta * reg.value,
        grad_logits=pll.grad_logits + w.alpha * nl.grad_logits + w.beta * reg.grad_logits,
    )


def pad_rows(out: LossOutput, total_rows: int, offset: int) -> LossOutput:
    """
    Gradyanı (total_rows, C) sıfır matrisinin [offset, offset+B) satırlarına yerleştirir.
    """
    b, c = out.grad_logits.shape
    if offset < 0 or offset + b > total_rows:
        raise DimensionError(f"rows [{offset}, {offset + b}) do not fit in {total_rows}")
    grad = np.zeros((total_rows, c), dtype=np.float64)
    grad[offset:offset + b] = out.grad_logits
    return LossOutput(value=out.value, grad_logits=grad)


def zero_loss(rows: int, num_classes: int) -> LossOutput:
    return LossOutput(value=0.0, grad_logits=np.zeros((rows, num_classes), dtype=np.float64))

