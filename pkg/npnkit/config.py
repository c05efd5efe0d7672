"""
Deney config'i

Öncelik sırası: varsayılanlar < preset < TOML dosyası < CLI bayrakları.
Bölümler: data (BlobSpec), noise (NoiseSpec), augment (AugmentSpec),
train (TrainConfig), output (OutputSpec). Üst seviyedeki `seed` verilirse
üretim, gürültü ve eğitim seed'lerinin hepsine uygulanır.

Örnek dosya:

    seed = 7

    [noise]
    kind = "symmetric"
    rate = 0.4

    [train]
    mode = "soft"
    alpha = 1.0
    beta = 2.0
"""
from __future__ import annotations

import copy
import json
import os
import sys
import time

if sys.version_info >= (3, 11):
    import tomllib
else:  # Python 3.10: API-identical backport
    import tomli as tomllib
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Optional

from .data import AugmentSpec, BlobSpec, NoiseSpec
from .helpers import ValidationError
from .trainer import TrainConfig

DEFAULT_OUT_ROOT = "runs"
OUT_ENV = "NPN_OUT"
DATASET_FORMATS = ("bin", "csv")
REPORT_FORMATS = ("csv", "json")

PRESETS: Dict[str, Dict[str, Dict[str, Any]]] = {
    "desk": {"train": {"total_epochs": 60, "warmup_epochs": 15, "batch_size": 64,
                       "warmup_lr": 0.05, "robust_lr": 0.05}},
    "paper": {"train": {"total_epochs": 300, "warmup_epochs": 100, "batch_size": 128,
                        "warmup_lr": 0.005, "robust_lr": 0.005}},
}


@dataclass
class OutputSpec:
    """
    Args:
        root: Zaman damgalı koşu dizinlerinin kökü (None: NPN_OUT ya da 'runs').
        dir: Tam çıktı dizini (verilirse root kullanılmaz).
        force: Dolu bir dizine yazmaya izin ver.
        format: Rapor çıktısı, 'json' | 'csv'.
        dataset_format: gen-data dosya biçimi, 'bin' | 'csv'.
    """
    root: Optional[str] = None
    dir: Optional[str] = None
    force: bool = False
    format: str = "json"
    dataset_format: str = "bin"

    def __post_init__(self) -> None:
        if self.format not in REPORT_FORMATS:
            raise ValidationError(f"output.format must be one of {REPORT_FORMATS}, got {self.format!r}")
        if self.dataset_format not in DATASET_FORMATS:
            raise ValidationError(
                f"output.dataset_format must be one of {DATASET_FORMATS}, got {self.dataset_format!r}"
            )


SECTIONS = {
    "data": BlobSpec,
    "noise": NoiseSpec,
    "augment": AugmentSpec,
    "train": TrainConfig,
    "output": OutputSpec,
}
# augment kendi bölümünde tutulur
_EXCLUDED = {"train": {"augment"}}


def section_keys(section: str) -> set:
    return {f.name for f in fields(SECTIONS[section])} - _EXCLUDED.get(section, set())


@dataclass
class ExperimentConfig:
    """Tüm bölümlerin çözümlenmiş hali."""
    data: BlobSpec = field(default_factory=BlobSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    augment: AugmentSpec = field(default_factory=AugmentSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    output: OutputSpec = field(default_factory=OutputSpec)

    def __post_init__(self) -> None:
        # train.augment her zaman augment bölümünü izler
        self.train.augment = self.augment

    def to_dict(self) -> Dict[str, Any]:
        train = self.train.to_dict()
        train.pop("augment", None)
        return {
            "data": asdict(self.data),
            "noise": asdict(self.noise),
            "augment": asdict(self.augment),
            "train": train,
            "output": asdict(self.output),
        }

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "ExperimentConfig":
        check_keys(raw)
        raw = copy.deepcopy(raw)
        seed = raw.pop("seed", None)
        if seed is not None:
            for section in ("data", "noise", "train"):
                raw.setdefault(section, {})["seed"] = seed
        parts = {}
        for name, klass in SECTIONS.items():
            try:
                parts[name] = klass(**raw.get(name, {}))
            except TypeError as e:
                raise ValidationError(f"invalid value in section [{name}]: {e}") from e
        return cls(**parts)


def check_keys(raw: Dict[str, Any]) -> None:
    """Bilinmeyen bölüm ya da anahtarları adıyla birlikte reddeder."""
    for key, value in raw.items():
        if key == "seed":
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise ValidationError(f"seed must be a non-negative integer, got {value!r}")
            continue
        if key not in SECTIONS:
            raise ValidationError(f"unknown config section {key!r}")
        if not isinstance(value, dict):
            raise ValidationError(f"config section {key!r} must be a table")
        unknown = sorted(set(value) - section_keys(key))
        if unknown:
            raise ValidationError(f"unknown key(s) in section [{key}]: {', '.join(unknown)}")


def merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Bölüm bazında birleştirme; override kazanır."""
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict):
            out.setdefault(key, {}).update(value)
        else:
            out[key] = value
    return out


def load_toml(path) -> Dict[str, Any]:
    source = Path(path)
    if not source.is_file():
        raise ValidationError(f"config file {source} does not exist")
    try:
        with source.open("rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as e:
        raise ValidationError(f"config file {source} is not valid TOML: {e}") from e
    check_keys(raw)
    return raw


def resolve(
    *,
    preset: Optional[str] = None,
    config_path=None,
    overrides: Optional[Dict[str, Any]] = None,
) -> ExperimentConfig:
    """
    Config katmanlarını birleştirip doğrulanmış ExperimentConfig döndürür.

    Args:
        preset: 'desk' | 'paper' | None.
        config_path: TOML dosyası.
        overrides: CLI'dan gelen {bölüm: {anahtar: değer}} (ve opsiyonel 'seed').

    Return:
        ExperimentConfig: Çözümlenmiş config.
    """
    raw: Dict[str, Any] = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ValidationError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        raw = merge(raw, PRESETS[preset])
    if config_path is not None:
        raw = merge(raw, load_toml(config_path))
    if overrides:
        check_keys(overrides)
        raw = merge(raw, overrides)
    return ExperimentConfig.from_dict(raw)


def output_root(cfg: ExperimentConfig) -> Path:
    return Path(cfg.output.root or os.environ.get(OUT_ENV) or DEFAULT_OUT_ROOT)


def run_directory(cfg: ExperimentConfig, label: str, *, now: Optional[float] = None) -> Path:
    """
    Çıktı dizini: --out verildiyse o; yoksa <root>/<YYYYmmdd-HHMMSS>-<seed>-<label>.
    """
    if cfg.output.dir:
        return Path(cfg.output.dir)
    stamp = time.strftime("%Y%m%d-%H%M%S", time.localtime(now))
    return output_root(cfg) / f"{stamp}-{cfg.train.seed}-{label}"


def prepare_directory(path: Path, *, force: bool) -> Path:
    """Dizini oluşturur; dolu bir dizin force olmadan reddedilir."""
    if path.exists():
        if not path.is_dir():
            raise ValidationError(f"output path {path} exists and is not a directory")
        if any(path.iterdir()) and not force:
            raise ValidationError(f"output directory {path} is not empty; pass --force to reuse it")
    path.mkdir(parents=True, exist_ok=True)
    return path


def echo_config(cfg: ExperimentConfig, directory, *, extra: Optional[Dict[str, Any]] = None) -> Path:
    """config.json: koşunun tam çözümlenmiş config'i (+ komut bilgisi)."""
    payload = cfg.to_dict()
    if extra:
        payload["command"] = extra
    target = Path(directory) / "config.json"
    target.write_text(json.dumps(payload, indent=2, sort_keys=True))
    return target
