from dataclasses import dataclass

import numpy as np


class NpnError(Exception):
    """Paket içindeki tüm hataların tabanı."""


class DimensionError(NpnError, ValueError):
    """Boyut / uzunluk uyuşmazlığı."""


class InvalidStateError(NpnError, RuntimeError):
    """Geçersiz iç durum (ör. tamamen sıfır histogram, eksik cache)."""


class ValidationError(NpnError, ValueError):
    """Parametre, config ya da CLI değeri geçersiz."""


class DatasetFormatError(NpnError):
    """Dataset dizini okunamadı ya da doğrulanamadı."""


class CheckpointError(NpnError):
    """Checkpoint dosyası okunamadı ya da doğrulanamadı."""


# Augment / NL görünüm kodları; RNG stream anahtarının parçası
VIEW_CODES = {"raw": 0, "weak": 1, "strong": 2, "nl": 3}


def view_code(view: str) -> int:
    """
    Görünüm adını stream kodu olarak döndür.

    Args:
        view: 'raw', 'weak', 'strong' ya da 'nl'.

    Return:
        int: Stream kodu.
    """
    code = VIEW_CODES.get(view)
    if code is None:
        raise ValidationError(f"Invalid view: {view!r}")
    return code


def sample_stream(seed: int, index: int, epoch: int, view: str) -> np.random.Generator:
    """
    (seed, sample index, epoch, view) için bağımsız bir RNG stream'i üretir.

    Philox sayaç tabanlıdır: anahtar seed'dir, sayacın üst kelimeleri
    (index, epoch, view) olur. Bir örnek için çekilen değerler yalnızca en alt
    kelimeyi ilerletir, böylece stream'ler çakışmaz ve çağrı sırasından
    bağımsızdır.

    Args:
        seed: Deney seed'i (u64).
        index: Örnek indeksi.
        epoch: Epoch numarası.
        view: Görünüm adı.

    Return:
        np.random.Generator: Deterministik üreteç.
    """
    counter = np.array([0, index, epoch, view_code(view)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=int(seed), counter=counter))


def run_stream(seed: int, *keys: int) -> np.random.Generator:
    """Dataset seviyesindeki işler (üretim, gürültü, shuffle) için seed'li üreteç."""
    return np.random.default_rng([int(seed), *[int(k) for k in keys]])


def percent(hits: int, total: int) -> float:
    """
    Yüzde hesapla; total=0 ise hata ver (0/0 sessizce 0 olmaz).
    """
    if total <= 0:
        raise ValidationError("percent of zero samples is undefined")
    return 100.0 * float(hits) / float(total)


@dataclass
class Phase:
    """
    Epoch'un hangi fazda olduğunu söyler.

    Args:
        warmup_epochs: E_w.
        total_epochs: E_total.
    """
    warmup_epochs: int
    total_epochs: int

    def of(self, epoch: int) -> str:
        """Return: str — 'warmup' ya da 'robust' (epoch 0 tabanlı)."""
        if not 0 <= epoch < self.total_epochs:
            raise ValidationError(f"epoch {epoch} outside [0, {self.total_epochs})")
        return "warmup" if epoch < self.warmup_epochs else "robust"


class Topics:
    """
    Topic yardımcıları

    Biçimler:
      - Metrics   : metrics:{run}
      - Checkpoint: checkpoint:{run}
    """

    @staticmethod
    def metrics(run: str) -> str:
        """
        Epoch metrikleri topic'i üretir.

        Args:
            run: Koşu adı.

        Return:
            str: Topic adı.
        """
        return f"metrics:{run}"

    @staticmethod
    def checkpoint(run: str) -> str:
        """
        Checkpoint bildirimi topic'i üretir.

        Args:
            run: Koşu adı.

        Return:
            str: Topic adı.
        """
        return f"checkpoint:{run}"
