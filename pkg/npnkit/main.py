"""
Komut satırı

    python -m npnkit gen-data --classes 10 --per-class 500 --noise symmetric --rate 0.4 --seed 1 --out d/
    python -m npnkit train --data d/ --mode hard --alpha 1.0 --beta 2.0 --seed 7
    python -m npnkit sweep --data d/ --alpha 0,0.5,1,2 --beta 0,1,2,4
    python -m npnkit ablate --data d/ --seeds 0,1,2
    python -m npnkit eval --checkpoint run/checkpoints/checkpoint-0060.npnc --data d/
    python -m npnkit inspect --checkpoint ... --data d/ --index 3 --index 17

Çıkış kodları: 0 başarı, 1 doğrulama / girdi hatası, 2 çalışma zamanı hatası.
Hata durumunda oluşturulmuş çıktı dizinine FAILED dosyası yazılır.

numpy ve paket modülleri komut fonksiyonlarının içinde import edilir:
--threads ortam değişkenleri BLAS yüklenmeden önce ayarlanmalı.
"""
import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# (ablasyon adı, dizin adı, TrainConfig değişiklikleri)
ABLATION_ROWS = (
    ("Standard", "standard", {"method": "standard"}),
    ("+NL", "nl", {"method": "npn", "mode": "given", "alpha": 1.0, "beta": 0.0}),
    ("+NL+PLL", "nl-pll", {"method": "npn", "alpha": 1.0, "beta": 0.0}),
    ("+NL+PLL+CR", "nl-pll-cr", {"method": "npn", "alpha": 1.0, "beta": 2.0}),
)


class UsageError(Exception):
    """argparse hataları (çıkış kodu 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text: str) -> List[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> List[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


# ----------------------------------------------------------------------------
# Config bayrakları: her config anahtarının bir bayrağı var
# ----------------------------------------------------------------------------
# flag -> (bölüm, anahtar, argparse kwargs)
CONFIG_FLAGS: Dict[str, tuple] = {
    "--classes": ("data", "num_classes", {"type": int}),
    "--per-class": ("data", "per_class", {"type": int}),
    "--test-per-class": ("data", "test_per_class", {"type": int}),
    "--dim": ("data", "dim", {"type": int}),
    "--separation": ("data", "separation", {"type": float}),
    "--noise": ("noise", "kind", {"choices": ("none", "symmetric", "asymmetric")}),
    "--rate": ("noise", "rate", {"type": float}),
    "--weak-sigma": ("augment", "weak_sigma", {"type": float}),
    "--strong-sigma": ("augment", "strong_sigma", {"type": float}),
    "--strong-dropout": ("augment", "strong_dropout", {"type": float}),
    "--epochs": ("train", "total_epochs", {"type": int}),
    "--warmup": ("train", "warmup_epochs", {"type": int}),
    "--batch-size": ("train", "batch_size", {"type": int}),
    "--alpha": ("train", "alpha", {"type": float}),
    "--beta": ("train", "beta", {"type": float}),
    "--mode": ("train", "mode", {"choices": ("hard", "soft", "given")}),
    "--method": ("train", "method", {"choices": ("npn", "standard")}),
    "--complementary": ("train", "complementary", {"choices": ("all", "random")}),
    "--topk": ("train", "candidate_topk", {"type": int}),
    "--hidden": ("train", "hidden", {"type": _int_list}),
    "--momentum": ("train", "momentum", {"type": float}),
    "--warmup-lr": ("train", "warmup_lr", {"type": float}),
    "--robust-lr": ("train", "robust_lr", {"type": float}),
    "--metrics-path": ("train", "metrics_path", {}),
    "--checkpoint-every": ("train", "checkpoint_every", {"type": int}),
    "--out": ("output", "dir", {}),
    "--out-root": ("output", "root", {}),
    "--force": ("output", "force", {"action": "store_true"}),
    "--format": ("output", "format", {"choices": ("csv", "json")}),
    "--dataset-format": ("output", "dataset_format", {"choices": ("bin", "csv")}),
}

DATA_FLAGS = ("--classes", "--per-class", "--test-per-class", "--dim", "--separation", "--noise", "--rate")
TRAIN_FLAGS = (
    "--weak-sigma", "--strong-sigma", "--strong-dropout", "--epochs", "--warmup", "--batch-size",
    "--alpha", "--beta", "--mode", "--method", "--complementary", "--topk", "--hidden",
    "--momentum", "--warmup-lr", "--robust-lr", "--metrics-path", "--checkpoint-every",
)
OUTPUT_FLAGS = ("--out", "--out-root", "--force")


def _add_config_flags(parser: argparse.ArgumentParser, flags, exclude=()) -> None:
    for flag in flags:
        if flag in exclude:
            continue
        section, key, kwargs = CONFIG_FLAGS[flag]
        parser.add_argument(flag, dest=f"{section}.{key}", default=argparse.SUPPRESS,
                            help=f"{section}.{key}", **kwargs)


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Yalnız verilen bayraklardan {bölüm: {anahtar: değer}} kur."""
    out: Dict[str, Any] = {}
    for dest, value in vars(args).items():
        if "." in dest:
            section, key = dest.split(".", 1)
            out.setdefault(section, {})[key] = value
    if args.seed is not None:
        out["seed"] = args.seed
    return out


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="TOML config file")
    common.add_argument("--preset", choices=("desk", "paper"))
    common.add_argument("--seed", type=int, help="seed for generation, noise and training")
    common.add_argument("--threads", type=int, help="BLAS threads; 1 gives byte-identical reruns")
    common.add_argument("--log-level", default="INFO", choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    _add_config_flags(common, ("--format",))

    parser = _Parser(prog="npnkit", description="Noisy-label training experiments")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-data", parents=[common], help="generate a noisy blob dataset")
    _add_config_flags(p, DATA_FLAGS + OUTPUT_FLAGS + ("--dataset-format",))
    p.set_defaults(handler=cmd_gen_data)

    p = sub.add_parser("train", parents=[common], help="train one model")
    p.add_argument("--data", required=True, help="dataset directory (with train/ and test/)")
    p.add_argument("--resume", help="checkpoint to continue from")
    _add_config_flags(p, TRAIN_FLAGS + OUTPUT_FLAGS)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("sweep", parents=[common], help="grid over alpha, beta and top-k")
    p.add_argument("--data", required=True)
    p.add_argument("--alpha", dest="alpha_grid", type=_float_list, default=[1.0])
    p.add_argument("--beta", dest="beta_grid", type=_float_list, default=[2.0])
    p.add_argument("--topk", dest="topk_grid", type=_int_list, default=[1])
    p.add_argument("--workers", type=int, default=1)
    _add_config_flags(p, TRAIN_FLAGS + OUTPUT_FLAGS, exclude=("--alpha", "--beta", "--topk"))
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("ablate", parents=[common], help="Standard / +NL / +NL+PLL / +NL+PLL+CR")
    p.add_argument("--data", required=True)
    p.add_argument("--seeds", type=_int_list, default=[0, 1, 2])
    p.add_argument("--workers", type=int, default=1)
    _add_config_flags(p, TRAIN_FLAGS + OUTPUT_FLAGS, exclude=("--alpha", "--beta", "--method"))
    p.set_defaults(handler=cmd_ablate)

    p = sub.add_parser("eval", parents=[common], help="accuracy of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("inspect", parents=[common], help="per-sample histogram report")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--index", type=int, action="append", default=[])
    p.add_argument("--all", action="store_true")
    p.set_defaults(handler=cmd_inspect)
    return parser


# ----------------------------------------------------------------------------
# Ortam
# ----------------------------------------------------------------------------
def pin_threads(threads: Optional[int]) -> None:
    if threads is None:
        return
    if threads < 1:
        raise UsageError(f"--threads must be >= 1, got {threads}")
    for var in THREAD_VARS:
        os.environ[var] = str(threads)


def configure_logging(level: str) -> None:
    logging.basicConfig(level=getattr(logging, level), format=LOG_FORMAT)
    logging.getLogger().setLevel(getattr(logging, level))


def attach_log_file(directory: Path, name: str = "train.log") -> logging.Handler:
    handler = logging.FileHandler(directory / name)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logging.getLogger().addHandler(handler)
    return handler


class RunContext:
    """Komutun oluşturduğu çıktı dizini (FAILED işareti için)."""

    def __init__(self) -> None:
        self.out_dir: Optional[Path] = None
        self.handlers: List[logging.Handler] = []

    def open(self, directory: Path, *, force: bool, log_name: str = "train.log") -> Path:
        from .config import prepare_directory

        prepare_directory(directory, force=force)
        self.out_dir = directory
        (directory / "FAILED").unlink(missing_ok=True)
        self.handlers.append(attach_log_file(directory, log_name))
        return directory

    def close(self) -> None:
        for handler in self.handlers:
            logging.getLogger().removeHandler(handler)
            handler.close()
        self.handlers.clear()


def _emit(payload: Any, fmt: str) -> None:
    """Raporu stdout'a json ya da csv olarak yazar."""
    if fmt == "json":
        print(json.dumps(payload, indent=2, sort_keys=True, default=str))
        return
    import pandas as pd

    rows = payload if isinstance(payload, list) else [payload]
    frame = pd.DataFrame([
        {k: " ".join(str(x) for x in v) if isinstance(v, list) else v for k, v in row.items()}
        for row in rows
    ])
    frame.to_csv(sys.stdout, index=False)


def _resolve(args: argparse.Namespace):
    from .config import resolve

    return resolve(preset=args.preset, config_path=args.config, overrides=_overrides(args))


def _split_dir(root, split: str) -> Path:
    root = Path(root)
    return root / split if (root / split).is_dir() else root


# ----------------------------------------------------------------------------
# Komutlar
# ----------------------------------------------------------------------------
def cmd_gen_data(args: argparse.Namespace, ctx: RunContext) -> int:
    from .config import echo_config, run_directory
    from .data import generate_blob_splits, inject_noise, noise_report, save_dataset

    cfg = _resolve(args)
    out = ctx.open(run_directory(cfg, "data"), force=cfg.output.force, log_name="gen-data.log")
    echo_config(cfg, out, extra={"name": "gen-data"})

    train, test = generate_blob_splits(cfg.data)
    train = inject_noise(train, cfg.noise)
    save_dataset(train, out / "train", cfg.output.dataset_format)
    save_dataset(test, out / "test", cfg.output.dataset_format)

    report = noise_report(train)
    logger.info("[gen-data] %d/%d train labels corrupted (%.4f)",
                report["corrupted"], train.num_samples, report["empirical_rate"])
    if cfg.output.format == "csv":
        report["transitions"].to_csv(sys.stdout)
    else:
        _emit({
            "directory": str(out),
            "kind": cfg.noise.kind,
            "rate": cfg.noise.rate,
            "corrupted": report["corrupted"],
            "empirical_rate": report["empirical_rate"],
            "samples": train.num_samples,
        }, "json")
    return EXIT_OK


def cmd_train(args: argparse.Namespace, ctx: RunContext) -> int:
    from .config import echo_config, run_directory
    from .data import load_splits
    from .trainer import train

    cfg = _resolve(args)
    ds_train, ds_test = load_splits(args.data)
    resuming = args.resume is not None
    out = ctx.open(run_directory(cfg, cfg.train.mode), force=cfg.output.force or resuming)
    echo_config(cfg, out, extra={"name": "train", "data": str(args.data), "resume": args.resume})

    result = train(cfg.train, ds_train, ds_test, out_dir=out, run_name=out.name, resume=args.resume)
    _emit({k: v for k, v in result.summary.items() if k != "config"}, cfg.output.format)
    return EXIT_OK


def _run_cell(train_cfg, data_dir: str, out_dir: str, name: str) -> Dict[str, Any]:
    """Sweep / ablasyon hücresi; ayrı süreçte de çalışabilir."""
    from .data import load_splits
    from .trainer import train

    ds_train, ds_test = load_splits(data_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = train(train_cfg, ds_train, ds_test, out_dir=out, run_name=name)
    summary = dict(result.summary)
    summary.pop("config", None)
    return summary


def _run_cells(cells: List[tuple], workers: int) -> List[Dict[str, Any]]:
    """cells: (train_cfg, data_dir, out_dir, name); sonuçlar hücre sırasıyla döner."""
    if workers < 1:
        raise UsageError(f"--workers must be >= 1, got {workers}")
    if workers == 1:
        return [_run_cell(*cell) for cell in cells]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run_cell, *cell) for cell in cells]
        return [f.result() for f in futures]


def cmd_sweep(args: argparse.Namespace, ctx: RunContext) -> int:
    from dataclasses import replace

    import pandas as pd

    from .config import echo_config, run_directory
    from .data import load_splits
    from .helpers import ValidationError

    if not args.alpha_grid or not args.beta_grid or not args.topk_grid:
        raise ValidationError("sweep grids must not be empty")
    cfg = _resolve(args)
    load_splits(args.data)
    out = ctx.open(run_directory(cfg, "sweep"), force=cfg.output.force, log_name="sweep.log")
    echo_config(cfg, out, extra={
        "name": "sweep", "data": str(args.data),
        "alpha": args.alpha_grid, "beta": args.beta_grid, "topk": args.topk_grid,
    })

    grid = [(a, b, k) for a in args.alpha_grid for b in args.beta_grid for k in args.topk_grid]
    cells = []
    for a, b, k in grid:
        name = f"alpha{a:g}-beta{b:g}-topk{k}"
        cell_cfg = replace(cfg.train, alpha=a, beta=b, candidate_topk=k, metrics_path=None)
        cells.append((cell_cfg, str(args.data), str(out / name), name))
    summaries = _run_cells(cells, args.workers)

    frame = pd.DataFrame([
        {"alpha": a, "beta": b, "topk": k, **s} for (a, b, k), s in zip(grid, summaries)
    ])
    frame.to_csv(out / "sweep.csv", index=False)
    best = frame.loc[frame["last10_mean_acc"].idxmax()]
    logger.info("[sweep] best cell alpha=%g beta=%g topk=%d: %.2f%%",
                best["alpha"], best["beta"], best["topk"], best["last10_mean_acc"])
    _emit(frame[["alpha", "beta", "topk", "last10_mean_acc", "best_acc"]].to_dict("records"),
          cfg.output.format)
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace, ctx: RunContext) -> int:
    from dataclasses import replace

    import pandas as pd

    from .config import echo_config, run_directory
    from .data import load_splits
    from .helpers import ValidationError

    if not args.seeds:
        raise ValidationError("ablation needs at least one seed")
    cfg = _resolve(args)
    load_splits(args.data)
    out = ctx.open(run_directory(cfg, "ablate"), force=cfg.output.force, log_name="ablate.log")
    echo_config(cfg, out, extra={"name": "ablate", "data": str(args.data), "seeds": args.seeds})

    pll_mode = "soft" if cfg.train.mode == "soft" else "hard"
    labels, cells = [], []
    for title, slug, changes in ABLATION_ROWS:
        changes = {"mode": pll_mode, **changes}
        for seed in args.seeds:
            name = f"{slug}-seed{seed}"
            cell_cfg = replace(cfg.train, seed=seed, metrics_path=None, **changes)
            labels.append((title, seed))
            cells.append((cell_cfg, str(args.data), str(out / name), name))
    summaries = _run_cells(cells, args.workers)

    runs = pd.DataFrame([
        {"ingredients": title, "seed": seed, **s} for (title, seed), s in zip(labels, summaries)
    ])
    runs.to_csv(out / "ablation_runs.csv", index=False)
    table = (
        runs.groupby("ingredients", sort=False)["last10_mean_acc"]
        .agg(["mean", "std", "count"])
        .reset_index()
        .rename(columns={"mean": "last10_mean_acc", "std": "last10_std", "count": "seeds"})
    )
    table.to_csv(out / "ablation.csv", index=False)
    for row in table.itertuples():
        logger.info("[ablate] %-12s %.2f%%", row.ingredients, row.last10_mean_acc)
    _emit(table.to_dict("records"), cfg.output.format)
    return EXIT_OK


def _network_from(ckpt):
    from .model import MlpNetwork

    net = MlpNetwork(ckpt.layer_dims)
    net.set_parameters(ckpt.params)
    return net


def cmd_eval(args: argparse.Namespace, ctx: RunContext) -> int:
    from .checkpoint import load_checkpoint
    from .data import load_dataset
    from .helpers import ValidationError
    from .trainer import evaluate

    cfg = _resolve(args)
    ckpt = load_checkpoint(args.checkpoint)
    ds = load_dataset(_split_dir(args.data, args.split))
    if ds.dim != ckpt.layer_dims[0] or ds.num_classes != ckpt.layer_dims[-1]:
        raise ValidationError(
            f"dataset ({ds.dim} features, {ds.num_classes} classes) does not fit "
            f"checkpoint layers {ckpt.layer_dims}"
        )
    acc = evaluate(_network_from(ckpt), ds)
    _emit({
        "checkpoint": str(args.checkpoint),
        "epoch": ckpt.epoch,
        "split": ds.split,
        "samples": ds.num_samples,
        "accuracy": acc,
    }, cfg.output.format)
    return EXIT_OK


def inspect_samples(ckpt, ds, indices: List[int]) -> List[Dict[str, Any]]:
    """
    Seçili örnekler için histogram, çözümleme ve güncel aday/tamamlayıcı üyelik.

    Args:
        ckpt: TrainingCheckpoint.
        ds: Checkpoint'in eğitildiği train split.
        indices: Örnek indeksleri.

    Return:
        List[Dict[str, Any]]: Örnek başına bir satır.
    """
    from .helpers import ValidationError
    from .labelspace import build_candidate_set, build_complementary_set, disambiguate, one_hot
    from .losses import softmax
    from .model import predict_logits

    hist = ckpt.histograms
    if hist.num_samples != ds.num_samples or hist.num_classes != ds.num_classes:
        raise ValidationError(
            f"checkpoint histograms {hist.counts.shape} do not match dataset "
            f"({ds.num_samples}, {ds.num_classes})"
        )
    per_sample = [hist.histogram(i) for i in indices]
    if not indices:
        return []
    probs = softmax(predict_logits(_network_from(ckpt), ds.features[indices]))
    topk = int(ckpt.config.get("candidate_topk", 1))
    rows = []
    for row, (i, h) in enumerate(zip(indices, per_sample)):
        d = disambiguate(h)
        cand = build_candidate_set(one_hot(int(ds.noisy_labels[i]), ds.num_classes), probs[row], topk)
        comp = build_complementary_set(cand)
        rows.append({
            "index": int(i),
            "noisy_label": int(ds.noisy_labels[i]),
            "true_label": int(ds.true_labels[i]),
            "counts": h.counts.tolist(),
            "epochs_observed": h.epochs_observed,
            "hard_label": d.hard_label,
            "hard_weight": d.hard_weight,
            "soft_label": d.soft_label.tolist(),
            "candidates": [int(c) for c in cand.membership.nonzero()[0]],
            "complementary": [int(c) for c in comp.membership.nonzero()[0]],
        })
    return rows


def cmd_inspect(args: argparse.Namespace, ctx: RunContext) -> int:
    from .checkpoint import load_checkpoint
    from .data import load_dataset
    from .helpers import ValidationError

    if not args.all and not args.index:
        raise ValidationError("give --index (repeatable) or --all")
    cfg = _resolve(args)
    ckpt = load_checkpoint(args.checkpoint)
    ds = load_dataset(_split_dir(args.data, "train"))
    indices = list(range(ds.num_samples)) if args.all else list(args.index)
    _emit(inspect_samples(ckpt, ds, indices), cfg.output.format)
    return EXIT_OK


# ----------------------------------------------------------------------------
# Giriş noktası
# ----------------------------------------------------------------------------
def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        pin_threads(args.threads)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    configure_logging(args.log_level)

    from .helpers import CheckpointError, DatasetFormatError, ValidationError

    ctx = RunContext()
    handler: Callable[[argparse.Namespace, RunContext], int] = args.handler
    try:
        return handler(args, ctx)
    except (UsageError, ValidationError, DatasetFormatError, CheckpointError) as e:
        logger.error("[%s] %s", args.command, e)
        code, error = EXIT_VALIDATION, e
    except Exception as e:
        logger.exception("[%s] failed: %s", args.command, e)
        code, error = EXIT_RUNTIME, e
    finally:
        ctx.close()
    if ctx.out_dir is not None:
        (ctx.out_dir / "FAILED").write_text(f"{type(error).__name__}: {error}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
