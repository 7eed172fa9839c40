"""Training loop and end-to-end inference.

Targets live in the same standardized frame as the network input: each
patch's ground-truth band is shifted and scaled by the input band's own
mean/std, so the network output can be mapped back to dB with statistics
known at inference time.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import Tensor, mse_loss
from .checkpoint import save_checkpoint
from .dataset import classic_path_for, list_pairs, read_dataset_meta, sample_name
from .errors import ConfigError, NumericError
from .forward_model import FringeFrame, SweepConfig
from .io import read_frg1, read_pair
from .model import AttentionUNet, ModelConfig
from .optim import Adam
from .patches import (N_PATCHES, STD_EPS, attach_wavenumber_channel, destandardize,
                      merge_patches, normalize_wavenumbers, row_wavenumbers,
                      split_patches, standardize)
from .pipeline import (BScan, TAG_NETWORK, classic_reconstruct, lambda_space_image)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 150
    batch_size: int = 12
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")


def frame_to_patches(image: np.ndarray, ws_norm: np.ndarray,
                     target: np.ndarray | None = None):
    """Split one frame into network-ready patch arrays.

    Returns (X, stats) or (X, Y, stats) with X of shape (4, 2, h, w); the
    target bands are standardized with the matching input band's statistics.
    """
    stacked = attach_wavenumber_channel(image, ws_norm)
    xs, ys, stats = [], [], []
    target_bands = split_patches(target[:, :, None]) if target is not None else None
    for i, patch in enumerate(split_patches(stacked)):
        scaled, mean, std = standardize(patch)
        xs.append(np.moveaxis(scaled, -1, 0))
        stats.append((mean, std))
        if target_bands is not None:
            ys.append((target_bands[i][None, :, :, 0] - mean) / (std + STD_EPS))
    x = np.stack(xs)
    if target is None:
        return x, stats
    return x, np.stack(ys), stats


def patches_to_frame(outputs: np.ndarray, stats: list[tuple[float, float]]) -> np.ndarray:
    """Map standardized network outputs (4, 1, h, w) back to a dB frame."""
    bands = [destandardize(outputs[i, 0], *stats[i])[:, :, None] for i in range(N_PATCHES)]
    return merge_patches(bands)[:, :, 0]


def build_patch_dataset(pairs: list[tuple[np.ndarray, np.ndarray]],
                        ws_norm: np.ndarray, dtype=np.float32):
    """Stack every frame's patches into one pool: X (P,2,h,w), Y (P,1,h,w)."""
    xs, ys = [], []
    for image, target in pairs:
        x, y, _ = frame_to_patches(np.asarray(image, dtype=np.float64),
                                   ws_norm, np.asarray(target, dtype=np.float64))
        xs.append(x)
        ys.append(y)
    return (np.concatenate(xs).astype(dtype), np.concatenate(ys).astype(dtype))


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float


def _eval_loss(model: AttentionUNet, x: np.ndarray, y: np.ndarray, batch_size: int) -> float:
    total = 0.0
    for lo in range(0, x.shape[0], batch_size):
        xb = x[lo: lo + batch_size]
        yb = y[lo: lo + batch_size]
        out = model.predict(xb)
        total += float(((out - yb) ** 2).sum())
    return total / y.size


def train_on_arrays(model: AttentionUNet, optimizer: Adam,
                    x_train: np.ndarray, y_train: np.ndarray,
                    x_val: np.ndarray | None, y_val: np.ndarray | None,
                    cfg: TrainConfig,
                    on_epoch=None) -> list[EpochRecord]:
    """Epoch loop over a patch pool; shuffling is the only randomness."""
    if x_train.shape[0] != y_train.shape[0] or x_train.shape[0] == 0:
        raise ValueError("training pool is empty or mismatched")
    rng = np.random.default_rng([cfg.seed, 11])
    history: list[EpochRecord] = []
    n = x_train.shape[0]
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        losses = []
        for b, lo in enumerate(range(0, n, cfg.batch_size)):
            idx = order[lo: lo + cfg.batch_size]
            out = model.forward(Tensor(x_train[idx]), training=True)
            loss = mse_loss(out, Tensor(y_train[idx]))
            value = float(loss.data)
            if not np.isfinite(value):
                raise NumericError(f"non-finite training loss at epoch {epoch}, batch {b}")
            loss.backward()
            optimizer.step()
            optimizer.zero_grad()
            losses.append(value)
        val = float("nan")
        if x_val is not None and x_val.shape[0]:
            val = _eval_loss(model, x_val, y_val, cfg.batch_size)
            if not np.isfinite(val):
                raise NumericError(f"non-finite validation loss at epoch {epoch}")
        record = EpochRecord(epoch, float(np.mean(losses)), val)
        history.append(record)
        if on_epoch is not None:
            on_epoch(record)
    return history


def load_split_pairs(dataset_dir: str | Path, split: str) -> list[tuple[np.ndarray, np.ndarray]]:
    return [read_pair(p) for p in list_pairs(dataset_dir, split)]


def ws_channel_from_meta(meta: dict, n_rows: int) -> np.ndarray:
    ks = row_wavenumbers(meta["k_min"], meta["k_max"], n_rows)
    return normalize_wavenumbers(ks, meta["k_min"], meta["k_max"])


def train_dataset(dataset_dir: str | Path, out_dir: str | Path,
                  model_cfg: ModelConfig, cfg: TrainConfig,
                  quiet: bool = True) -> dict:
    """Train on a generated dataset directory and write checkpoints + history."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = read_dataset_meta(dataset_dir)
    train_pairs = load_split_pairs(dataset_dir, "train")
    val_pairs = load_split_pairs(dataset_dir, "val")
    if not train_pairs:
        raise ConfigError(f"no training pairs found under {dataset_dir}")
    n_rows = train_pairs[0][0].shape[0]
    ws_norm = ws_channel_from_meta(meta, n_rows)
    model_cfg.check_patch_extents(n_rows // N_PATCHES, train_pairs[0][0].shape[1])

    x_train, y_train = build_patch_dataset(train_pairs, ws_norm)
    x_val, y_val = (build_patch_dataset(val_pairs, ws_norm)
                    if val_pairs else (None, None))

    model = AttentionUNet(model_cfg, seed=cfg.seed, dtype=np.float32)
    optimizer = Adam(model.params, lr=cfg.learning_rate, beta1=cfg.beta1,
                     beta2=cfg.beta2, eps=cfg.eps)

    best = {"val": float("inf"), "epoch": 0}
    best_path = out / "best.wun1"
    final_path = out / "final.wun1"

    def on_epoch(rec: EpochRecord) -> None:
        if not quiet:
            print(f"epoch {rec.epoch:4d}  train {rec.train_loss:.6f}  val {rec.val_loss:.6f}")
        if np.isfinite(rec.val_loss) and rec.val_loss < best["val"]:
            best["val"] = rec.val_loss
            best["epoch"] = rec.epoch
            save_checkpoint(best_path, model, optimizer, epoch=rec.epoch,
                            best_val_loss=rec.val_loss)

    history = train_on_arrays(model, optimizer, x_train, y_train, x_val, y_val,
                              cfg, on_epoch=on_epoch)
    if not np.isfinite(best["val"]):
        save_checkpoint(best_path, model, optimizer, epoch=cfg.epochs,
                        best_val_loss=history[-1].train_loss)
        best["epoch"] = cfg.epochs
        best["val"] = history[-1].train_loss
    save_checkpoint(final_path, model, optimizer, epoch=cfg.epochs,
                    best_val_loss=best["val"])
    history_path = out / "loss_history.csv"
    with open(history_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "train_loss", "val_loss"])
        for rec in history:
            writer.writerow([rec.epoch, f"{rec.train_loss:.9g}", f"{rec.val_loss:.9g}"])
    return {
        "history": history,
        "best_epoch": best["epoch"],
        "best_val_loss": best["val"],
        "best_path": best_path,
        "final_path": final_path,
        "history_path": history_path,
        "model": model,
    }


# --- Inference --------------------------------------------------------------------


def network_reconstruct(model: AttentionUNet, frame: FringeFrame,
                        background: np.ndarray, ws_norm: np.ndarray) -> BScan:
    """Direct-transform preprocessing plus network restoration, back in dB."""
    image = lambda_space_image(frame, background).intensity
    x, stats = frame_to_patches(image, ws_norm)
    out = model.predict(x.astype(model.dtype))
    return BScan(patches_to_frame(np.asarray(out, dtype=np.float64), stats), tag=TAG_NETWORK)


def infer_volume(model: AttentionUNet, frames: list[FringeFrame],
                 background: np.ndarray, source_k: np.ndarray, target_k: np.ndarray,
                 ws_norm: np.ndarray, method: str = "cubic"):
    """Run both reconstruction paths over a volume, recording wall time.

    Returns (network scans, classic scans, timing dict); timing values are
    wall-clock seconds and belong in log-style outputs only.
    """
    nets, classics = [], []
    t_net, t_classic = [], []
    for frame in frames:
        t0 = time.perf_counter()
        nets.append(network_reconstruct(model, frame, background, ws_norm))
        t1 = time.perf_counter()
        classics.append(classic_reconstruct(frame, background, source_k, target_k, method=method))
        t2 = time.perf_counter()
        t_net.append(t1 - t0)
        t_classic.append(t2 - t1)
    timing = {
        "n_frames": len(frames),
        "network_total_s": float(np.sum(t_net)),
        "classic_total_s": float(np.sum(t_classic)),
        "network_per_frame_s": [float(v) for v in t_net],
        "classic_per_frame_s": [float(v) for v in t_classic],
    }
    timing["ratio_classic_over_network"] = (
        timing["classic_total_s"] / timing["network_total_s"]
        if timing["network_total_s"] > 0 else float("inf"))
    return nets, classics, timing


def evaluate_rows(dataset_dir: str | Path, model: AttentionUNet,
                  db_span: float = 60.0, sample_fraction: float = 1.0,
                  seed: int = 0, split: str = "test"):
    """Metric rows for {input, classic, network} against ground truth.

    The display window is [volume max - db_span, volume max], where the max
    is taken over the split's ground-truth frames of each volume.
    """
    from .metrics import MetricRow, score_pair

    if not 0.0 < sample_fraction <= 1.0:
        raise ConfigError(f"sample_fraction must lie in (0, 1], got {sample_fraction}")
    meta = read_dataset_meta(dataset_dir)
    paths = list_pairs(dataset_dir, split)
    if not paths:
        raise ConfigError(f"no {split} pairs under {dataset_dir}")
    if sample_fraction < 1.0:
        keep = max(1, int(round(sample_fraction * len(paths))))
        idx = np.random.default_rng([seed, 23]).choice(len(paths), size=keep, replace=False)
        paths = [paths[i] for i in np.sort(idx)]

    by_volume: dict[str, list] = {}
    loaded = []
    for p in paths:
        image, truth = read_pair(p)
        classic, _ = read_frg1(classic_path_for(p))
        loaded.append((p, image, truth, classic))
        by_volume.setdefault(p.parent.name, []).append(float(truth.max()))
    window_hi = {vol: max(vals) for vol, vals in by_volume.items()}

    n_rows = loaded[0][1].shape[0]
    ws_norm = ws_channel_from_meta(meta, n_rows)
    rows: list[MetricRow] = []
    for p, image, truth, classic in loaded:
        hi = window_hi[p.parent.name]
        lo = hi - db_span
        x, stats = frame_to_patches(np.asarray(image, dtype=np.float64), ws_norm)
        net = patches_to_frame(np.asarray(model.predict(x.astype(model.dtype)),
                                          dtype=np.float64), stats)
        name = sample_name(p)
        t64 = np.asarray(truth, dtype=np.float64)
        rows.append(score_pair(np.asarray(image, dtype=np.float64), t64, lo, hi, name, "input"))
        rows.append(score_pair(np.asarray(classic, dtype=np.float64), t64, lo, hi, name, "classic"))
        rows.append(score_pair(net, t64, lo, hi, name, "network"))
    return rows
