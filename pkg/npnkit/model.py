"""
Küçük tam bağlı sınıflandırıcı (MLP), elle türetilmiş geri yayılım,
momentumlu SGD ve warm-up + cosine öğrenme oranı takvimi.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .helpers import DimensionError, InvalidStateError, ValidationError, run_stream


# run_stream anahtarı: ağırlık başlatma
_INIT_STREAM = 11


@dataclass
class ForwardCache:
    """
    backward() için ileri geçişte saklanan aktivasyonlar.

    Args:
        inputs: Her katmanın girdisi (ilki ağ girdisi).
        pre_activations: Gizli katmanların ReLU öncesi değerleri.
        version: Ağın o anki parametre versiyonu.
    """
    inputs: List[np.ndarray]
    pre_activations: List[np.ndarray]
    version: int


class MlpNetwork:
    """
    Gizli katmanlarda ReLU, çıkışta kimlik (logit) kullanan MLP.

    Args:
        layer_dims: [D_in, H_1, ..., H_k, C].
        seed: Ağırlık başlatma seed'i; None ise tüm parametreler sıfır.
    """

    def __init__(self, layer_dims: Sequence[int], seed: Optional[int] = None):
        dims = [int(d) for d in layer_dims]
        if len(dims) < 2 or any(d < 1 for d in dims) or dims[-1] < 2:
            raise ValidationError(f"invalid layer dims {dims}; need [D_in, ..., C>=2]")
        self.layer_dims = dims
        self.weights: List[np.ndarray] = []
        self.biases: List[np.ndarray] = []
        rng = run_stream(seed, _INIT_STREAM) if seed is not None else None
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            if rng is None:
                w = np.zeros((fan_in, fan_out), dtype=np.float64)
            else:
                limit = math.sqrt(6.0 / (fan_in + fan_out))
                w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out, dtype=np.float64))
        # sgd_step her güncellemede artırır; eski cache'leri yakalamak için
        self.version = 0

    @property
    def num_classes(self) -> int:
        return self.layer_dims[-1]

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    def parameters(self) -> List[np.ndarray]:
        """Return: List[np.ndarray] — [W_1, b_1, W_2, b_2, ...] sırası."""
        params: List[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            params.extend([w, b])
        return params

    def set_parameters(self, params: Sequence[np.ndarray]) -> None:
        """Checkpoint'ten yükleme; şekiller birebir tutmalı."""
        current = self.parameters()
        if len(params) != len(current):
            raise DimensionError(f"expected {len(current)} parameter arrays, got {len(params)}")
        for i, (old, new) in enumerate(zip(current, params)):
            if old.shape != np.shape(new):
                raise DimensionError(f"parameter {i} shape {np.shape(new)} != {old.shape}")
        self.weights = [np.array(p, dtype=np.float64) for p in params[0::2]]
        self.biases = [np.array(p, dtype=np.float64) for p in params[1::2]]
        self.version += 1

    def copy(self) -> "MlpNetwork":
        clone = MlpNetwork(self.layer_dims)
        clone.set_parameters([p.copy() for p in self.parameters()])
        return clone


def forward(net: MlpNetwork, inputs: np.ndarray) -> Tuple[np.ndarray, ForwardCache]:
    """
    İleri geçiş.

    Args:
        net: Ağ.
        inputs: (B, D_in) girdiler.

    Return:
        Tuple[np.ndarray, ForwardCache]: (B, C) logit'ler ve cache.
    """
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.input_dim:
        raise DimensionError(f"input shape {x.shape} does not match D_in={net.input_dim}")
    layer_inputs = [x]
    pre_acts: List[np.ndarray] = []
    h = x
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        if i == last:
            h = z
        else:
            pre_acts.append(z)
            h = np.maximum(z, 0.0)
            layer_inputs.append(h)
    return h, ForwardCache(layer_inputs, pre_acts, net.version)


def predict_logits(net: MlpNetwork, inputs: np.ndarray) -> np.ndarray:
    """Cache tutmadan yalnızca logit'ler."""
    logits, _ = forward(net, inputs)
    return logits


def backward(net: MlpNetwork, cache: Optional[ForwardCache], grad_logits: np.ndarray) -> List[np.ndarray]:
    """
    Geri yayılım.

    Args:
        net: Ağ.
        cache: Aynı parametrelerle yapılmış forward() cache'i.
        grad_logits: (B, C) kaybın logit gradyanı.

    Return:
        List[np.ndarray]: parameters() ile aynı sırada gradyanlar.
    """
    if cache is None or cache.version != net.version:
        raise InvalidStateError("backward needs the cache of a forward pass on the current parameters")
    g = np.asarray(grad_logits, dtype=np.float64)
    batch = cache.inputs[0].shape[0]
    if g.shape != (batch, net.num_classes):
        raise DimensionError(f"grad_logits shape {g.shape} != {(batch, net.num_classes)}")
    grads: List[np.ndarray] = [None] * (2 * len(net.weights))
    for i in range(len(net.weights) - 1, -1, -1):
        h_in = cache.inputs[i]
        grads[2 * i] = h_in.T @ g
        grads[2 * i + 1] = g.sum(axis=0)
        if i > 0:
            g = (g @ net.weights[i].T) * (cache.pre_activations[i - 1] > 0)
    return grads


@dataclass
class OptimizerState:
    """
    Momentumlu SGD durumu.

    Args:
        buffers: Parametre şekillerinde momentum tamponları.
        momentum: mu (varsayılan 0.9).
        base_lr: Başlangıç öğrenme oranı (bilgi amaçlı).
        step: Uygulanan adım sayısı.
    """
    buffers: List[np.ndarray]
    momentum: float = 0.9
    base_lr: float = 0.05
    step: int = 0

    @classmethod
    def for_network(cls, net: MlpNetwork, momentum: float = 0.9, base_lr: float = 0.05) -> "OptimizerState":
        if not 0.0 <= momentum < 1.0:
            raise ValidationError(f"momentum must be in [0, 1), got {momentum}")
        return cls([np.zeros_like(p) for p in net.parameters()], momentum, base_lr, 0)


def sgd_step(net: MlpNetwork, grads: Sequence[np.ndarray], opt: OptimizerState, lr: float) -> None:
    """
    Klasik (heavy-ball) momentum: v <- mu v + g; theta <- theta - lr v.

    Ağ ve optimizer yerinde güncellenir.
    """
    params = net.parameters()
    if len(grads) != len(params) or len(opt.buffers) != len(params):
        raise DimensionError("gradient / buffer count does not match parameter count")
    for p, g, v in zip(params, grads, opt.buffers):
        if g.shape != p.shape or v.shape != p.shape:
            raise DimensionError(f"shape mismatch: param {p.shape}, grad {g.shape}, buffer {v.shape}")
        v *= opt.momentum
        v += g
        p -= lr * v
    opt.step += 1
    net.version += 1


@dataclass
class LrSchedule:
    """
    Warm-up boyunca sabit, robust fazda 0'a cosine azalan öğrenme oranı.

    Args:
        warmup_epochs: E_w.
        total_epochs: E_total.
        warmup_lr: Warm-up sabit oranı.
        robust_base_lr: Robust faz başlangıç oranı.
    """
    warmup_epochs: int
    total_epochs: int
    warmup_lr: float = 0.05
    robust_base_lr: float = 0.05

    def __post_init__(self) -> None:
        if not 0 <= self.warmup_epochs <= self.total_epochs or self.total_epochs < 1:
            raise ValidationError(
                f"need 0 <= warmup_epochs <= total_epochs and total_epochs >= 1, "
                f"got {self.warmup_epochs}/{self.total_epochs}"
            )
        if self.warmup_lr < 0 or self.robust_base_lr < 0:
            raise ValidationError("learning rates must be >= 0")


def lr_at(schedule: LrSchedule, epoch: int) -> float:
    """
    Args:
        schedule: Takvim.
        epoch: 0 tabanlı epoch.

    Return:
        float: Öğrenme oranı.
    """
    if not 0 <= epoch < schedule.total_epochs:
        raise ValidationError(f"epoch {epoch} outside [0, {schedule.total_epochs})")
    if epoch < schedule.warmup_epochs:
        return schedule.warmup_lr
    span = schedule.total_epochs - schedule.warmup_epochs
    progress = (epoch - schedule.warmup_epochs) / span
    return schedule.robust_base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))
