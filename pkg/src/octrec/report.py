"""Figure rendering for report outputs (headless matplotlib)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_loss_curves(history, path: str | Path) -> None:
    epochs = [r.epoch for r in history]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, [r.train_loss for r in history], label="train")
    vals = [r.val_loss for r in history]
    if np.any(np.isfinite(vals)):
        ax.plot(epochs, vals, label="validation")
    ax.set_xlabel("epoch")
    ax.set_ylabel("MSE loss")
    ax.set_yscale("log")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_metric_bars(means: dict[str, dict[str, float]], path: str | Path) -> None:
    variants = list(means.keys())
    fig, axes = plt.subplots(1, 3, figsize=(10, 3.2))
    for ax, key, label in zip(axes, ("psnr_db", "ssim", "mse"),
                              ("PSNR (dB)", "SSIM", "MSE")):
        vals = [means[v][key] for v in variants]
        ax.bar(variants, vals, color=["#999999", "#5588cc", "#cc7744"][: len(variants)])
        ax.set_title(label)
        ax.tick_params(axis="x", rotation=20)
        ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_image_panel(images: dict[str, np.ndarray], path: str | Path) -> None:
    """Side-by-side grayscale panels, e.g. input / classic / network / truth."""
    n = len(images)
    fig, axes = plt.subplots(1, n, figsize=(3.0 * n, 4))
    if n == 1:
        axes = [axes]
    for ax, (title, img) in zip(axes, images.items()):
        ax.imshow(np.asarray(img), cmap="gray", aspect="auto")
        ax.set_title(title, fontsize=9)
        ax.axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_bench_chart(classic_total: float, network_total: float, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.bar(["classic", "network"], [classic_total, network_total],
           color=["#5588cc", "#cc7744"])
    ax.set_ylabel("total seconds")
    ratio = classic_total / network_total if network_total > 0 else float("inf")
    ax.set_title(f"classic / network = {ratio:.2f}")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
