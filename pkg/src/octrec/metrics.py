"""Image-quality metrics and the display mapping they are computed on.

Comparisons run on display-mapped images: a dB window is clamped and
affinely scaled onto 8-bit levels, then rescaled to [0, 1] before MSE, PSNR,
and SSIM.  PSNR of identical images reports infinity.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import correlate1d

DEFAULT_DB_SPAN = 60.0


def display_map(db_image: np.ndarray, db_lo: float, db_hi: float) -> np.ndarray:
    """Clamp a dB image to [db_lo, db_hi] and map it affinely onto 0..255.

    Values round half away from zero, so the window midpoint lands on 128.
    """
    if not db_lo < db_hi:
        raise ValueError(f"degenerate display window: [{db_lo}, {db_hi}]")
    img = np.asarray(db_image, dtype=np.float64)
    scaled = (np.clip(img, db_lo, db_hi) - db_lo) * (255.0 / (db_hi - db_lo))
    return np.floor(scaled + 0.5).astype(np.uint8)


def to_unit(image_u8: np.ndarray) -> np.ndarray:
    img = np.asarray(image_u8)
    if img.dtype != np.uint8:
        raise ValueError(f"expected uint8 display image, got {img.dtype}")
    return img.astype(np.float64) / 255.0


def mse(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shapes differ: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("empty images")
    return float(np.mean((a - b) ** 2))


def psnr(a: np.ndarray, b: np.ndarray, max_value: float = 1.0) -> float:
    if max_value <= 0.0:
        raise ValueError(f"max_value must be positive, got {max_value}")
    err = mse(a, b)
    if err == 0.0:
        return math.inf
    return float(10.0 * math.log10(max_value**2 / err))


def _gaussian_taps(window_size: int, sigma: float) -> np.ndarray:
    half = (window_size - 1) / 2.0
    x = np.arange(window_size) - half
    w = np.exp(-(x**2) / (2.0 * sigma**2))
    return w / w.sum()


def ssim(a: np.ndarray, b: np.ndarray, max_value: float = 1.0,
         window_size: int = 11, sigma: float = 1.5,
         k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean structural similarity over valid Gaussian-weighted windows."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shapes differ: {a.shape} vs {b.shape}")
    if a.ndim != 2:
        raise ValueError(f"expected 2-D images, got shape {a.shape}")
    if max_value <= 0.0 or sigma <= 0.0 or window_size < 1:
        raise ValueError("max_value, sigma must be positive and window_size >= 1")
    if min(a.shape) < window_size:
        raise ValueError(f"image extents {a.shape} smaller than window {window_size}")
    taps = _gaussian_taps(window_size, sigma)

    def local_mean(img: np.ndarray) -> np.ndarray:
        tmp = correlate1d(img, taps, axis=0, mode="constant")
        tmp = correlate1d(tmp, taps, axis=1, mode="constant")
        lo = window_size // 2  # first output index whose window lies fully inside
        hi_r = lo + (a.shape[0] - window_size + 1)
        hi_c = lo + (a.shape[1] - window_size + 1)
        return tmp[lo:hi_r, lo:hi_c]

    mu_a = local_mean(a)
    mu_b = local_mean(b)
    var_a = local_mean(a * a) - mu_a**2
    var_b = local_mean(b * b) - mu_b**2
    cov = local_mean(a * b) - mu_a * mu_b
    c1 = (k1 * max_value) ** 2
    c2 = (k2 * max_value) ** 2
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


# --- Report rows --------------------------------------------------------------

CSV_HEADER = ["sample", "variant", "psnr_db", "ssim", "mse"]


@dataclass(frozen=True)
class MetricRow:
    sample: str
    variant: str
    psnr_db: float
    ssim: float
    mse: float


def score_pair(test_db: np.ndarray, truth_db: np.ndarray,
               db_lo: float, db_hi: float,
               sample: str, variant: str) -> MetricRow:
    """Display-map both images with one shared window, then score."""
    t = to_unit(display_map(test_db, db_lo, db_hi))
    g = to_unit(display_map(truth_db, db_lo, db_hi))
    return MetricRow(sample=sample, variant=variant,
                     psnr_db=psnr(t, g), ssim=ssim(t, g), mse=mse(t, g))


def write_metrics_csv(rows: list[MetricRow], path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_HEADER)
        for r in rows:
            writer.writerow([r.sample, r.variant,
                             repr(float(r.psnr_db)) if math.isinf(r.psnr_db) else f"{r.psnr_db:.9g}",
                             f"{r.ssim:.9g}", f"{r.mse:.9g}"])


def read_metrics_csv(path: str | Path) -> list[MetricRow]:
    rows = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        for rec in reader:
            rows.append(MetricRow(rec[0], rec[1], float(rec[2]), float(rec[3]), float(rec[4])))
    return rows


def mean_by_variant(rows: list[MetricRow]) -> dict[str, dict[str, float]]:
    out: dict[str, dict[str, float]] = {}
    variants = sorted({r.variant for r in rows})
    for v in variants:
        got = [r for r in rows if r.variant == v]
        out[v] = {
            "psnr_db": float(np.mean([r.psnr_db for r in got])),
            "ssim": float(np.mean([r.ssim for r in got])),
            "mse": float(np.mean([r.mse for r in got])),
        }
    return out
