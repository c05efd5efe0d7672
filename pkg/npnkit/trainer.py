"""
Eğitim döngüsü

Warm-up: ağırlıklandırılmamış CE ile SGD; her iterasyonda güncel modelin ham
görünüm tahmininden aday küme kurulur ve histograma eklenir.
Robust: aday + tamamlayıcı küme, histogram birikimi, çözümleme, ardından
L = L_PLL + alpha L_NL + beta L_REG ile tek geri yayılım ve SGD adımı.

Her epoch sonunda EpochMetrics `metrics:{run}` topic'ine yayınlanır;
CSV / log çıktısı adapters.py'deki sink'lerin işidir.
"""
from __future__ import annotations

import asyncio
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from . import losses as L
from .adapters import METRICS_COLUMNS, CsvMetricsSink, LogSink, write_summary
from .checkpoint import TrainingCheckpoint, load_checkpoint, save_checkpoint
from .data import AugmentSpec, Dataset, augment_batch
from .eventbus import EventBus
from .helpers import (
    DimensionError, Phase, Topics, ValidationError, percent, run_stream, sample_stream,
)
from .labelspace import (
    HistogramStore, build_candidates_batch, complementary_batch, random_complementary_batch,
)
from .model import (
    LrSchedule, MlpNetwork, OptimizerState, backward, forward, lr_at, predict_logits, sgd_step,
)

logger = logging.getLogger(__name__)

MODES = ("hard", "soft", "given")
METHODS = ("npn", "standard")
COMPLEMENTARY = ("all", "random")
LAST_K = 10

# run_stream anahtarı: epoch shuffle
_SHUFFLE_STREAM = 21


@dataclass
class TrainConfig:
    """
    Algoritmanın tüm ayarları.

    Args:
        total_epochs: E_total.
        warmup_epochs: E_w (0 <= E_w <= E_total).
        batch_size: bs.
        alpha, beta: L_NL ve L_REG ağırlıkları.
        mode: 'hard' | 'soft' | 'given' (PLL terimi; 'given' verilen etikete CE).
        method: 'npn' | 'standard' (standard: her epoch warm-up CE adımı).
        complementary: 'all' (tüm aday dışı sınıflar) | 'random' (tek rastgele sınıf).
        candidate_topk: Aday kümeye eklenen tahmin sayısı.
        hidden: Gizli katman genişlikleri.
        momentum, warmup_lr, robust_lr: Optimizer ve takvim.
        augment: Weak/strong augmentation ayarları.
        seed: Deney seed'i.
        metrics_path: Metrik CSV yolu (None: çıktı dizinindeki metrics.csv).
        checkpoint_every: Kaç epoch'ta bir checkpoint (0: kapalı).
    """
    total_epochs: int = 60
    warmup_epochs: int = 15
    batch_size: int = 64
    alpha: float = 1.0
    beta: float = 2.0
    mode: str = "hard"
    method: str = "npn"
    complementary: str = "all"
    candidate_topk: int = 1
    hidden: Tuple[int, ...] = (128, 128)
    momentum: float = 0.9
    warmup_lr: float = 0.05
    robust_lr: float = 0.05
    augment: AugmentSpec = field(default_factory=AugmentSpec)
    seed: int = 0
    metrics_path: Optional[str] = None
    checkpoint_every: int = 10

    def __post_init__(self) -> None:
        self.hidden = tuple(int(h) for h in self.hidden)
        if isinstance(self.augment, dict):
            self.augment = AugmentSpec(**self.augment)
        errors = self.validate()
        if errors:
            raise ValidationError("; ".join(errors))

    def validate(self) -> List[str]:
        """Return: List[str] — tüm ihlaller (boş liste: geçerli)."""
        errors: List[str] = []
        if self.total_epochs < 1:
            errors.append(f"total_epochs must be >= 1, got {self.total_epochs}")
        if not 0 <= self.warmup_epochs <= self.total_epochs:
            errors.append(f"warmup_epochs must be in [0, total_epochs], got {self.warmup_epochs}")
        if self.batch_size < 1:
            errors.append(f"batch_size must be >= 1, got {self.batch_size}")
        if self.alpha < 0 or self.beta < 0:
            errors.append("alpha and beta must be >= 0")
        if self.mode not in MODES:
            errors.append(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.method not in METHODS:
            errors.append(f"method must be one of {METHODS}, got {self.method!r}")
        if self.complementary not in COMPLEMENTARY:
            errors.append(f"complementary must be one of {COMPLEMENTARY}, got {self.complementary!r}")
        if self.candidate_topk < 1:
            errors.append(f"candidate_topk must be >= 1, got {self.candidate_topk}")
        if any(h < 1 for h in self.hidden):
            errors.append(f"hidden widths must be >= 1, got {self.hidden}")
        if not 0.0 <= self.momentum < 1.0:
            errors.append(f"momentum must be in [0, 1), got {self.momentum}")
        if self.warmup_lr < 0 or self.robust_lr < 0:
            errors.append("learning rates must be >= 0")
        if self.seed < 0:
            errors.append(f"seed must be >= 0, got {self.seed}")
        if self.checkpoint_every < 0:
            errors.append(f"checkpoint_every must be >= 0, got {self.checkpoint_every}")
        return errors

    @property
    def effective_warmup(self) -> int:
        """standard yöntemde tüm epoch'lar warm-up adımıyla çalışır."""
        return self.total_epochs if self.method == "standard" else self.warmup_epochs

    @property
    def weights(self) -> L.LossWeights:
        return L.LossWeights(self.alpha, self.beta)

    @property
    def schedule(self) -> LrSchedule:
        return LrSchedule(self.effective_warmup, self.total_epochs, self.warmup_lr, self.robust_lr)

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


@dataclass
class EpochMetrics:
    """
    Bir epoch'un özet satırı. Yüzdeler [0, 100].
    """
    epoch: int
    phase: str
    lr: float
    loss_total: float
    loss_pll: float
    loss_nl: float
    loss_reg: float
    test_acc: float
    hit_rate: float
    disamb_precision: float

    def as_row(self) -> Dict[str, Any]:
        return {k: getattr(self, k) for k in METRICS_COLUMNS}


@dataclass
class StepLosses:
    """Bir robust iterasyonunun kayıp bileşenleri."""
    total: float
    pll: float
    nl: float
    reg: float


@dataclass
class TrainResult:
    """
    Args:
        net: Eğitilmiş ağ.
        histograms: Son histogramlar.
        metrics: Epoch başına satırlar (METRICS_COLUMNS).
        summary: Son-10 ortalama, en iyi doğruluk, süre, config.
        checkpoints: Yazılan checkpoint dosyaları.
    """
    net: MlpNetwork
    histograms: HistogramStore
    metrics: pd.DataFrame
    summary: Dict[str, Any]
    checkpoints: List[Path] = field(default_factory=list)


def evaluate(net: MlpNetwork, ds: Dataset) -> float:
    """
    Top-1 doğruluk (%); argmax eşitliğinde küçük indeks.

    Args:
        net: Ağ.
        ds: Değerlendirme seti (gerçek etiketlerle).

    Return:
        float: Doğruluk yüzdesi.
    """
    if ds.num_samples == 0:
        raise ValidationError("cannot evaluate on zero samples")
    logits = predict_logits(net, ds.features)
    hits = int(np.count_nonzero(np.argmax(logits, axis=1) == ds.true_labels))
    return percent(hits, ds.num_samples)


def diagnostics(
    histograms: HistogramStore,
    candidates: np.ndarray,
    true_labels: np.ndarray,
) -> Tuple[float, float]:
    """
    Aday isabet oranı ve çözümleme kesinliği.

    Args:
        histograms: Güncel histogramlar.
        candidates: (N, C) bu epoch'un aday sayıları.
        true_labels: (N,) gerçek etiketler.

    Return:
        Tuple[float, float]: (hit_rate %, disambiguation_precision %).
    """
    true_labels = np.asarray(true_labels, dtype=np.int64)
    candidates = np.asarray(candidates)
    n = true_labels.shape[0]
    if candidates.shape != (n, histograms.num_classes) or histograms.num_samples != n:
        raise DimensionError(
            f"diagnostics inputs disagree: histograms {histograms.counts.shape}, "
            f"candidates {candidates.shape}, labels {true_labels.shape}"
        )
    hits = int(np.count_nonzero(candidates[np.arange(n), true_labels] > 0))
    if n == 0:
        raise ValidationError("diagnostics need at least one sample")
    hard, _, _ = histograms.disambiguate_batch()
    correct = int(np.count_nonzero(hard == true_labels))
    return percent(hits, n), percent(correct, n)


def summarize(metrics: pd.DataFrame, config: Dict[str, Any], wall_clock: float) -> Dict[str, Any]:
    """
    Son on epoch ortalaması ve en iyi test doğruluğu.
    """
    if metrics.empty:
        raise ValidationError("no epochs to summarize")
    acc = metrics["test_acc"].astype(float)
    return {
        "config": config,
        "epochs": int(len(metrics)),
        "last10_mean_acc": float(acc.tail(LAST_K).mean()),
        "best_acc": float(acc.max()),
        "final_acc": float(acc.iloc[-1]),
        "final_hit_rate": float(metrics["hit_rate"].iloc[-1]),
        "final_disamb_precision": float(metrics["disamb_precision"].iloc[-1]),
        "wall_clock_seconds": float(wall_clock),
    }


class Trainer:
    """
    Eğitim durumunu (ağ, optimizer, histogramlar) tutar ve epoch'ları çalıştırır.

    Args:
        cfg: Eğitim ayarları.
        ds_train: Gürültülü eğitim seti.
        ds_test: Temiz test seti.
        bus: Metriklerin yayınlanacağı EventBus (yoksa yenisi).
        run_name: Topic adı için koşu adı.
        checkpoint_dir: Checkpoint dizini (None: yazılmaz).
    """

    def __init__(
        self,
        cfg: TrainConfig,
        ds_train: Dataset,
        ds_test: Dataset,
        *,
        bus: Optional[EventBus] = None,
        run_name: str = "run",
        checkpoint_dir: Optional[Path] = None,
    ):
        if ds_train.split != "train":
            raise ValidationError("trainer needs the train split")
        if ds_test.num_classes != ds_train.num_classes or ds_test.dim != ds_train.dim:
            raise DimensionError("train and test splits disagree on classes or feature width")
        if cfg.candidate_topk >= ds_train.num_classes:
            raise ValidationError(f"candidate_topk must be < C={ds_train.num_classes}")
        self.cfg = cfg
        self.ds_train = ds_train
        self.ds_test = ds_test
        self.bus = bus or EventBus()
        self.run_name = run_name
        self.checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir else None

        dims = [ds_train.dim, *cfg.hidden, ds_train.num_classes]
        self.net = MlpNetwork(dims, seed=cfg.seed)
        self.opt = OptimizerState.for_network(self.net, cfg.momentum, cfg.warmup_lr)
        self.schedule = cfg.schedule
        self.phase = Phase(cfg.effective_warmup, cfg.total_epochs)
        self.histograms = HistogramStore.from_noisy_labels(ds_train.noisy_labels, ds_train.num_classes)
        self.start_epoch = 0
        self.metrics: List[Dict[str, Any]] = []
        self.checkpoints: List[Path] = []
        self._features = ds_train.features.astype(np.float64)

    # ------------------------------------------------------------------
    # Durum
    # ------------------------------------------------------------------
    def capture(self, epoch: int) -> TrainingCheckpoint:
        """epoch'un başındaki durumun kopyası."""
        return TrainingCheckpoint(
            epoch=epoch,
            seed=self.cfg.seed,
            layer_dims=list(self.net.layer_dims),
            params=[p.copy() for p in self.net.parameters()],
            buffers=[b.copy() for b in self.opt.buffers],
            opt_step=self.opt.step,
            momentum=self.opt.momentum,
            histograms=self.histograms.snapshot(),
            config=self.cfg.to_dict(),
            metrics=[dict(m) for m in self.metrics],
        )

    def restore(self, ckpt: TrainingCheckpoint) -> None:
        """Checkpoint'ten devam: sonuçlar kesintisiz koşuyla birebir aynı olur."""
        if list(ckpt.layer_dims) != list(self.net.layer_dims):
            raise DimensionError(f"checkpoint layers {ckpt.layer_dims} != {self.net.layer_dims}")
        if ckpt.histograms.counts.shape != self.histograms.counts.shape:
            raise DimensionError("checkpoint histograms do not match the train split")
        if ckpt.seed != self.cfg.seed:
            raise ValidationError(f"checkpoint seed {ckpt.seed} != config seed {self.cfg.seed}")
        self.net.set_parameters(ckpt.params)
        self.opt = OptimizerState([b.copy() for b in ckpt.buffers], ckpt.momentum, self.opt.base_lr, ckpt.opt_step)
        self.histograms = ckpt.histograms.snapshot()
        self.start_epoch = ckpt.epoch
        self.metrics = [dict(m) for m in ckpt.metrics]

    def batches(self, epoch: int) -> List[np.ndarray]:
        """Epoch'a göre seed'li karıştırma; son eksik batch atılmaz."""
        order = run_stream(self.cfg.seed, _SHUFFLE_STREAM, epoch).permutation(self.ds_train.num_samples)
        bs = self.cfg.batch_size
        return [order[i:i + bs] for i in range(0, order.shape[0], bs)]

    # ------------------------------------------------------------------
    # İterasyonlar
    # ------------------------------------------------------------------
    def _candidates(self, idx: np.ndarray, x_raw: np.ndarray) -> np.ndarray:
        raw_probs = L.softmax(predict_logits(self.net, x_raw))
        return build_candidates_batch(self.ds_train.noisy_labels[idx], raw_probs, self.cfg.candidate_topk)

    def warmup_step(self, idx: np.ndarray, epoch: int, lr: float, candidates_out: np.ndarray) -> float:
        """
        CE ile bir SGD adımı, ardından güncel modelle aday kurulumu ve birikim.

        Return:
            float: Batch CE değeri.
        """
        x = self._features[idx]
        y = self.ds_train.noisy_labels[idx]
        xw = augment_batch(x, idx, epoch, self.cfg.augment, "weak", self.cfg.seed)
        logits, cache = forward(self.net, xw)
        ce = L.ce_loss(L.softmax(logits), y)
        sgd_step(self.net, backward(self.net, cache, ce.grad_logits), self.opt, lr)

        cand = self._candidates(idx, x)
        self.histograms.accumulate_batch(idx, cand)
        candidates_out[idx] = cand
        return ce.value

    def robust_step(self, idx: np.ndarray, epoch: int, lr: float, candidates_out: np.ndarray) -> StepLosses:
        """
        Aday/tamamlayıcı kurulumu, birikim, çözümleme ve birleşik kayıpla tek SGD adımı.
        """
        cfg = self.cfg
        x = self._features[idx]
        y = self.ds_train.noisy_labels[idx]
        b = idx.shape[0]
        c = self.ds_train.num_classes

        cand = self._candidates(idx, x)
        if cfg.complementary == "all":
            comp = complementary_batch(cand)
        else:
            rngs = [sample_stream(cfg.seed, int(i), epoch, "nl") for i in idx]
            comp = random_complementary_batch(y, c, rngs)
        self.histograms.accumulate_batch(idx, cand)
        candidates_out[idx] = cand
        hard, weight, soft = self.histograms.disambiguate_batch(idx)

        xw = augment_batch(x, idx, epoch, cfg.augment, "weak", cfg.seed)
        xs = augment_batch(x, idx, epoch, cfg.augment, "strong", cfg.seed)
        logits, cache = forward(self.net, np.vstack([xw, xs]))
        probs = L.softmax(logits)
        p_weak, p_strong = probs[:b], probs[b:]

        if cfg.mode == "hard":
            pll = L.pll_hard_loss(p_weak, hard, weight)
        elif cfg.mode == "soft":
            pll = L.pll_soft_loss(p_weak, soft)
        else:
            pll = L.ce_loss(p_weak, y)
        nl = L.nl_loss(p_weak, comp)
        # sözde etiket sabit: argmax, gradyan taşımaz
        pseudo = np.argmax(p_weak, axis=1)
        reg = L.reg_loss(p_strong, pseudo)

        total = L.combined_loss(
            L.pad_rows(pll, 2 * b, 0),
            L.pad_rows(nl, 2 * b, 0),
            L.pad_rows(reg, 2 * b, b),
            cfg.weights,
        )
        sgd_step(self.net, backward(self.net, cache, total.grad_logits), self.opt, lr)
        return StepLosses(total.value, pll.value, nl.value, reg.value)

    # ------------------------------------------------------------------
    # Epoch'lar
    # ------------------------------------------------------------------
    def _finish_epoch(self, epoch: int, lr: float, sums: np.ndarray, candidates: np.ndarray) -> EpochMetrics:
        n = self.ds_train.num_samples
        hit, precision = diagnostics(self.histograms, candidates, self.ds_train.true_labels)
        total, pll, nl, reg = (sums / n).tolist()
        return EpochMetrics(
            epoch=epoch + 1,
            phase=self.phase.of(epoch),
            lr=lr,
            loss_total=total,
            loss_pll=pll,
            loss_nl=nl,
            loss_reg=reg,
            test_acc=evaluate(self.net, self.ds_test),
            hit_rate=hit,
            disamb_precision=precision,
        )

    def warmup_epoch(self, epoch: int) -> EpochMetrics:
        """Warm-up fazında bir epoch (0 tabanlı epoch < E_w)."""
        if self.phase.of(epoch) != "warmup":
            raise ValidationError(f"epoch {epoch} is not a warm-up epoch")
        lr = lr_at(self.schedule, epoch)
        candidates = np.zeros_like(self.histograms.counts)
        sums = np.zeros(4)
        for idx in self.batches(epoch):
            ce = self.warmup_step(idx, epoch, lr, candidates)
            sums[0] += ce * idx.shape[0]
        return self._finish_epoch(epoch, lr, sums, candidates)

    def robust_epoch(self, epoch: int) -> EpochMetrics:
        """Robust fazda bir epoch (E_w <= 0 tabanlı epoch < E_total)."""
        if self.phase.of(epoch) != "robust":
            raise ValidationError(f"epoch {epoch} is not a robust epoch")
        lr = lr_at(self.schedule, epoch)
        candidates = np.zeros_like(self.histograms.counts)
        sums = np.zeros(4)
        for idx in self.batches(epoch):
            step = self.robust_step(idx, epoch, lr, candidates)
            sums += np.array([step.total, step.pll, step.nl, step.reg]) * idx.shape[0]
        return self._finish_epoch(epoch, lr, sums, candidates)

    def _save(self, ckpt: TrainingCheckpoint, name: str) -> Optional[Path]:
        if self.checkpoint_dir is None:
            return None
        path = save_checkpoint(self.checkpoint_dir / name, ckpt)
        self.checkpoints.append(path)
        return path

    async def run(self) -> TrainResult:
        """
        Kalan tüm epoch'ları çalıştırır. Bir epoch hata verirse o epoch'un
        başındaki durum `failed.npnc` olarak yazılır ve hata yükseltilir.
        """
        started = time.perf_counter()
        cfg = self.cfg
        for epoch in range(self.start_epoch, cfg.total_epochs):
            snapshot = self.capture(epoch)
            try:
                if self.phase.of(epoch) == "warmup":
                    m = self.warmup_epoch(epoch)
                else:
                    m = self.robust_epoch(epoch)
            except Exception:
                path = self._save(snapshot, "failed.npnc")
                logger.error("[Trainer] epoch %d failed; state saved to %s", epoch + 1, path)
                raise
            self.metrics.append(m.as_row())
            # metrics.csv eksik kalmasın: sink hatası koşuyu düşürür
            await self.bus.publish(Topics.metrics(self.run_name), m, msg_id=m.epoch, dedupe=True, strict=True)

            done = epoch + 1
            if cfg.checkpoint_every and (done % cfg.checkpoint_every == 0 or done == cfg.total_epochs):
                path = self._save(self.capture(done), f"checkpoint-{done:04d}.npnc")
                if path is not None:
                    await self.bus.publish(
                        Topics.checkpoint(self.run_name), {"epoch": done, "path": str(path)},
                        msg_id=done, dedupe=True,
                    )

        frame = pd.DataFrame(self.metrics, columns=list(METRICS_COLUMNS))
        summary = summarize(frame, cfg.to_dict(), time.perf_counter() - started)
        return TrainResult(self.net, self.histograms, frame, summary, list(self.checkpoints))


def train(
    cfg: TrainConfig,
    ds_train: Dataset,
    ds_test: Dataset,
    *,
    out_dir=None,
    run_name: str = "run",
    resume=None,
    bus: Optional[EventBus] = None,
) -> TrainResult:
    """
    Algoritmanın tamamı: E_w warm-up, ardından robust epoch'lar.

    Args:
        cfg: Eğitim ayarları.
        ds_train: Gürültülü eğitim seti.
        ds_test: Temiz test seti.
        out_dir: Verilirse metrics.csv, summary.json ve checkpoints/ buraya yazılır.
        run_name: Topic adı.
        resume: Devam edilecek checkpoint yolu.
        bus: Dışarıdan sink bağlanmış EventBus.

    Return:
        TrainResult: Ağ, metrik tablosu, özet ve checkpoint yolları.
    """
    bus = bus or EventBus()
    out = Path(out_dir) if out_dir is not None else None
    trainer = Trainer(
        cfg, ds_train, ds_test, bus=bus, run_name=run_name,
        checkpoint_dir=out / "checkpoints" if out is not None else None,
    )
    if resume is not None:
        trainer.restore(load_checkpoint(resume))
        logger.info("[Trainer] resuming %s from epoch %d", run_name, trainer.start_epoch + 1)

    sinks = [LogSink(bus)]
    metrics_path = cfg.metrics_path or (str(out / "metrics.csv") if out is not None else None)
    if metrics_path:
        csv_sink = CsvMetricsSink(bus, metrics_path)
        csv_sink.reset(trainer.metrics)
        sinks.append(csv_sink)
    for sink in sinks:
        sink.bind()
    try:
        result = asyncio.run(trainer.run())
    finally:
        for sink in sinks:
            sink.unbind()

    if out is not None:
        write_summary(out / "summary.json", result.summary)
    logger.info(
        "[Trainer] %s done: last-%d mean acc %.2f%%, best %.2f%%",
        run_name, LAST_K, result.summary["last10_mean_acc"], result.summary["best_acc"],
    )
    return result
