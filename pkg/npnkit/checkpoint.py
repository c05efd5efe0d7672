"""
Checkpoint dosya biçimi (little-endian)

  magic      4 bayt  b"NPNC"
  version    u32
  sections   u32     bölüm sayısı
  her bölüm: tag (4 bayt ASCII) + uzunluk (u64) + içerik

Bölümler:
  META  UTF-8 JSON: epoch, seed, layer_dims, config, metrik geçmişi
  PARM  dizi listesi: [W_1, b_1, ...]
  OPTM  dizi listesi: momentum tamponları
  HIST  dizi listesi: [counts (C, N) sınıf-öncelikli, epochs_observed (N,)]
  RNGS  UTF-8 JSON: shuffle/augment stream'lerinin türetildiği seed ve sıradaki epoch

Dizi listesi: u32 adet; her dizi için dtype kodu (1 bayt, 'f' float64 / 'i' int64),
u32 ndim, ndim x u64 boyut, ardından ham veri.
"""
from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List

import numpy as np

from .helpers import CheckpointError
from .labelspace import HistogramStore

MAGIC = b"NPNC"
VERSION = 1
REQUIRED_SECTIONS = ("META", "PARM", "OPTM", "HIST", "RNGS")

_DTYPES = {b"f": np.dtype("<f8"), b"i": np.dtype("<i8")}


@dataclass
class TrainingCheckpoint:
    """
    Kaldığı yerden birebir devam etmek için gereken eğitim durumu.

    Args:
        epoch: Sıradaki (henüz çalışmamış) epoch, 0 tabanlı.
        seed: Deney seed'i.
        layer_dims: Ağ katman boyutları.
        params: Ağ parametreleri.
        buffers: Momentum tamponları.
        opt_step: Uygulanan SGD adım sayısı.
        momentum: mu.
        histograms: Aday histogramları.
        config: Koşunun çözümlenmiş config'i.
        metrics: Şimdiye kadarki epoch metrik satırları.
    """
    epoch: int
    seed: int
    layer_dims: List[int]
    params: List[np.ndarray]
    buffers: List[np.ndarray]
    opt_step: int
    momentum: float
    histograms: HistogramStore
    config: Dict[str, Any] = field(default_factory=dict)
    metrics: List[Dict[str, Any]] = field(default_factory=list)


def _pack_arrays(arrays: List[np.ndarray]) -> bytes:
    buf = io.BytesIO()
    buf.write(struct.pack("<I", len(arrays)))
    for arr in arrays:
        arr = np.asarray(arr)
        code = b"f" if arr.dtype.kind == "f" else b"i"
        data = np.ascontiguousarray(arr, dtype=_DTYPES[code])
        buf.write(code)
        buf.write(struct.pack("<I", data.ndim))
        buf.write(struct.pack(f"<{data.ndim}Q", *data.shape))
        buf.write(data.tobytes(order="C"))
    return buf.getvalue()


def _unpack_arrays(payload: bytes, tag: str) -> List[np.ndarray]:
    view = memoryview(payload)
    try:
        (count,) = struct.unpack_from("<I", view, 0)
        pos = 4
        out: List[np.ndarray] = []
        for _ in range(count):
            code = bytes(view[pos:pos + 1])
            dtype = _DTYPES.get(code)
            if dtype is None:
                raise CheckpointError(f"section {tag}: unknown dtype code {code!r}")
            (ndim,) = struct.unpack_from("<I", view, pos + 1)
            shape = struct.unpack_from(f"<{ndim}Q", view, pos + 5)
            pos += 5 + 8 * ndim
            nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
            if pos + nbytes > len(view):
                raise CheckpointError(f"section {tag} is truncated")
            out.append(np.frombuffer(view[pos:pos + nbytes], dtype=dtype).reshape(shape).copy())
            pos += nbytes
    except struct.error as e:
        raise CheckpointError(f"section {tag} is truncated: {e}") from e
    return out


def save_checkpoint(path, ckpt: TrainingCheckpoint) -> Path:
    """
    Checkpoint'i yazar (önce geçici dosyaya, sonra yerine taşır).

    Return:
        Path: Yazılan dosya.
    """
    meta = {
        "epoch": ckpt.epoch,
        "seed": ckpt.seed,
        "layer_dims": list(ckpt.layer_dims),
        "opt_step": ckpt.opt_step,
        "momentum": ckpt.momentum,
        "config": ckpt.config,
        "metrics": ckpt.metrics,
    }
    rngs = {"seed": ckpt.seed, "next_epoch": ckpt.epoch}
    sections = [
        (b"META", json.dumps(meta, sort_keys=True).encode("utf-8")),
        (b"PARM", _pack_arrays(ckpt.params)),
        (b"OPTM", _pack_arrays(ckpt.buffers)),
        (b"HIST", _pack_arrays([ckpt.histograms.counts.T, ckpt.histograms.epochs_observed])),
        (b"RNGS", json.dumps(rngs, sort_keys=True).encode("utf-8")),
    ]
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<II", VERSION, len(sections)))
    for tag, payload in sections:
        buf.write(tag)
        buf.write(struct.pack("<Q", len(payload)))
        buf.write(payload)

    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = target.with_suffix(target.suffix + ".tmp")
    tmp.write_bytes(buf.getvalue())
    tmp.replace(target)
    return target


def load_checkpoint(path) -> TrainingCheckpoint:
    """
    Checkpoint'i okur ve doğrular.

    Hatalar: dosya yok, magic/versiyon hatalı, bölüm eksik ya da kesik.
    """
    source = Path(path)
    if not source.is_file():
        raise CheckpointError(f"checkpoint {source} does not exist")
    raw = source.read_bytes()
    if raw[:4] != MAGIC:
        raise CheckpointError(f"{source} is not a checkpoint (bad magic {raw[:4]!r})")
    if len(raw) < 12:
        raise CheckpointError(f"{source} is truncated")
    version, count = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")

    sections: Dict[str, bytes] = {}
    pos = 12
    for _ in range(count):
        if pos + 12 > len(raw):
            raise CheckpointError(f"{source} is truncated")
        tag = raw[pos:pos + 4].decode("ascii", errors="replace")
        (length,) = struct.unpack_from("<Q", raw, pos + 4)
        pos += 12
        if pos + length > len(raw):
            raise CheckpointError(f"section {tag} is truncated")
        sections[tag] = raw[pos:pos + length]
        pos += length
    missing = [t for t in REQUIRED_SECTIONS if t not in sections]
    if missing:
        raise CheckpointError(f"checkpoint is missing sections {missing}")

    try:
        meta = json.loads(sections["META"].decode("utf-8"))
        rngs = json.loads(sections["RNGS"].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"checkpoint metadata is corrupt: {e}") from e
    hist = _unpack_arrays(sections["HIST"], "HIST")
    if len(hist) != 2:
        raise CheckpointError("section HIST must hold counts and epochs_observed")
    if rngs.get("next_epoch") != meta.get("epoch"):
        raise CheckpointError("sections META and RNGS disagree on the epoch")
    return TrainingCheckpoint(
        epoch=int(meta["epoch"]),
        seed=int(rngs["seed"]),
        layer_dims=[int(d) for d in meta["layer_dims"]],
        params=_unpack_arrays(sections["PARM"], "PARM"),
        buffers=_unpack_arrays(sections["OPTM"], "OPTM"),
        opt_step=int(meta["opt_step"]),
        momentum=float(meta["momentum"]),
        histograms=HistogramStore(np.ascontiguousarray(hist[0].T), hist[1]),
        config=meta.get("config", {}),
        metrics=meta.get("metrics", []),
    )
