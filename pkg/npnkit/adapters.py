"""
EventBus -> çıktı köprüleri

- CsvMetricsSink: `metrics:*` yayınlarını metrics.csv'ye satır satır ekler.
- LogSink: metrik ve checkpoint yayınlarını logger'a yazar.

Her sink kendi handler'larını bind() ile abone eder, unbind() ile kaldırır.
Callback imzası: cb(payload, msg_id).
"""
import json
import logging
from dataclasses import asdict, is_dataclass
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, Optional

import pandas as pd

from .eventbus import EventBus
from .helpers import ValidationError

logger = logging.getLogger(__name__)

# metrics.csv sütun sırası
METRICS_COLUMNS = (
    "epoch", "phase", "lr", "loss_total", "loss_pll", "loss_nl", "loss_reg",
    "test_acc", "hit_rate", "disamb_precision",
)


def _as_row(payload: Any) -> Dict[str, Any]:
    if is_dataclass(payload):
        payload = asdict(payload)
    if not isinstance(payload, dict):
        raise ValidationError(f"metrics payload must be a mapping, got {type(payload).__name__}")
    missing = [c for c in METRICS_COLUMNS if c not in payload]
    if missing:
        raise ValidationError(f"metrics payload is missing {missing}")
    return {c: payload[c] for c in METRICS_COLUMNS}


# ----------------------------------------------------------------------------
# Formatters
# ----------------------------------------------------------------------------
def format_metrics_message(payload: Any) -> str:
    row = _as_row(payload)
    return (
        f"epoch {row['epoch']:>3} [{row['phase']}] lr={row['lr']:.5f} "
        f"loss={row['loss_total']:.4f} (pll={row['loss_pll']:.4f} nl={row['loss_nl']:.4f} "
        f"reg={row['loss_reg']:.4f}) acc={row['test_acc']:.2f}% "
        f"hit={row['hit_rate']:.2f}% prec={row['disamb_precision']:.2f}%"
    )


def format_checkpoint_message(payload: Dict[str, Any]) -> str:
    return f"checkpoint after epoch {payload.get('epoch')}: {payload.get('path')}"


# ----------------------------------------------------------------------------
# Sinks
# ----------------------------------------------------------------------------
class CsvMetricsSink:
    """
    Metrik satırlarını CSV'ye ekler (başlık + epoch başına bir satır).

    Args:
        bus: EventBus örneği.
        path: metrics.csv yolu.
        pattern: Dinlenecek topic deseni.
    """

    def __init__(self, bus: EventBus, path, *, pattern: str = "metrics:*") -> None:
        self.bus = bus
        self.path = Path(path)
        self.pattern = pattern
        self._handler: Optional[Callable[[Any, int], None]] = None

    def reset(self, rows: Iterable[Dict[str, Any]] = ()) -> None:
        """Dosyayı yalnız başlık (ve verilen satırlar) ile yeniden yazar."""
        self.path.parent.mkdir(parents=True, exist_ok=True)
        frame = pd.DataFrame([_as_row(r) for r in rows], columns=list(METRICS_COLUMNS))
        frame.to_csv(self.path, index=False)

    def append(self, payload: Any) -> None:
        write_header = not self.path.exists() or self.path.stat().st_size == 0
        pd.DataFrame([_as_row(payload)], columns=list(METRICS_COLUMNS)).to_csv(
            self.path, mode="a", header=write_header, index=False
        )

    def bind(self) -> None:
        if self._handler is not None:
            return

        def _on_metrics(payload: Any, msg_id: int) -> None:
            self.append(payload)

        self._handler = _on_metrics
        self.bus.subscribe(self.pattern, _on_metrics)

    def unbind(self) -> None:
        if self._handler is None:
            return
        self.bus.unsubscribe(self.pattern, self._handler)
        self._handler = None


class LogSink:
    """
    EventBus -> logging köprüsü.

    Args:
        bus: EventBus örneği.
        subscriptions: pattern -> formatter haritası.
        level: Log seviyesi.
    """

    def __init__(
        self,
        bus: EventBus,
        *,
        subscriptions: Optional[Dict[str, Callable[[Any], str]]] = None,
        level: int = logging.INFO,
    ) -> None:
        self.bus = bus
        self.subscriptions = subscriptions or {
            "metrics:*": format_metrics_message,
            "checkpoint:*": format_checkpoint_message,
        }
        self.level = level
        self._handlers: Dict[str, Callable[[Any, int], None]] = {}

    def bind(self) -> None:
        if self._handlers:
            return
        for pattern, formatter in self.subscriptions.items():
            def _handler(payload: Any, msg_id: int, _fmt=formatter) -> None:
                try:
                    text = _fmt(payload)
                except Exception:
                    text = repr(payload)
                logger.log(self.level, "[Train] %s", text)

            self._handlers[pattern] = _handler
            self.bus.subscribe(pattern, _handler)

    def unbind(self) -> None:
        for pattern, handler in list(self._handlers.items()):
            self.bus.unsubscribe(pattern, handler)
        self._handlers.clear()


# ----------------------------------------------------------------------------
# Dosya yardımcıları
# ----------------------------------------------------------------------------
def write_summary(path, summary: Dict[str, Any]) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(summary, indent=2, sort_keys=True))
    return target


def read_metrics(path) -> pd.DataFrame:
    """metrics.csv'yi okur; sütunlar eksikse ValidationError."""
    frame = pd.read_csv(path)
    missing = [c for c in METRICS_COLUMNS if c not in frame.columns]
    if missing:
        raise ValidationError(f"{path} is missing metric columns {missing}")
    return frame[list(METRICS_COLUMNS)]
