"""Network input assembly: wavenumber channel, patch bands, standardization.

A B-scan enters the network as four contiguous height bands, each a
two-channel patch: channel 0 is the (standardized) image band, channel 1 a
normalized per-row wavenumber ramp shared by all columns.
"""
from __future__ import annotations

import numpy as np

N_PATCHES = 4
STD_EPS = 1e-8

MODE_RECIPROCAL = "reciprocal_lambda"
MODE_LINEAR = "linear"


def row_wavenumbers(k_lo: float, k_hi: float, n_rows: int, mode: str = MODE_RECIPROCAL) -> np.ndarray:
    """Wavenumber associated with each image row, descending from k_hi to k_lo.

    ``reciprocal_lambda`` follows the instrument's wavelength-linear sweep
    (k = 2*pi/lambda over an ascending wavelength ramp); ``linear`` spaces the
    rows evenly in wavenumber instead.
    """
    if not k_lo < k_hi:
        raise ValueError(f"require k_lo < k_hi, got {k_lo} >= {k_hi}")
    if n_rows < 2:
        raise ValueError(f"need at least 2 rows, got {n_rows}")
    if mode == MODE_RECIPROCAL:
        lam = np.linspace(2.0 * np.pi / k_hi, 2.0 * np.pi / k_lo, n_rows)
        return 2.0 * np.pi / lam
    if mode == MODE_LINEAR:
        return np.linspace(k_hi, k_lo, n_rows)
    raise ValueError(f"unknown wavenumber mode {mode!r}")


def normalize_wavenumbers(ks: np.ndarray, k_lo: float, k_hi: float) -> np.ndarray:
    """Affine map of [k_lo, k_hi] onto [0, 1]."""
    if not k_lo < k_hi:
        raise ValueError(f"require k_lo < k_hi, got {k_lo} >= {k_hi}")
    return (np.asarray(ks, dtype=np.float64) - k_lo) / (k_hi - k_lo)


def attach_wavenumber_channel(image: np.ndarray, ks_norm: np.ndarray) -> np.ndarray:
    """Stack the image with a column-replicated wavenumber ramp: H x W x 2."""
    img = np.asarray(image)
    ks = np.asarray(ks_norm)
    if img.ndim != 2:
        raise ValueError(f"image must be 2-D, got shape {img.shape}")
    if ks.shape != (img.shape[0],):
        raise ValueError(f"wavenumber channel length {ks.shape} does not match {img.shape[0]} rows")
    ramp = np.repeat(ks[:, None], img.shape[1], axis=1)
    return np.stack([img, ramp], axis=-1)


def split_patches(tensor: np.ndarray) -> list[np.ndarray]:
    """Cut H x W x C into four contiguous height bands of H/4 rows each."""
    t = np.asarray(tensor)
    if t.ndim != 3:
        raise ValueError(f"expected H x W x C input, got shape {t.shape}")
    h = t.shape[0]
    if h % N_PATCHES != 0:
        raise ValueError(f"height {h} not divisible by {N_PATCHES}")
    band = h // N_PATCHES
    return [t[i * band: (i + 1) * band].copy() for i in range(N_PATCHES)]


def merge_patches(patches: list[np.ndarray]) -> np.ndarray:
    """Inverse of split_patches for same-width bands."""
    if len(patches) != N_PATCHES:
        raise ValueError(f"expected {N_PATCHES} patches, got {len(patches)}")
    shapes = {p.shape for p in patches}
    if len(shapes) != 1:
        raise ValueError(f"patch shapes differ: {sorted(shapes)}")
    return np.concatenate(patches, axis=0)


def standardize(patch: np.ndarray, eps: float = STD_EPS) -> tuple[np.ndarray, float, float]:
    """Zero-mean unit-variance scaling of channel 0; channel 1 passes through.

    Returns the scaled patch plus the (mean, std) pair needed to undo it.
    """
    p = np.asarray(patch)
    if p.ndim != 3 or p.shape[2] < 1:
        raise ValueError(f"expected H x W x C patch, got shape {p.shape}")
    mean = float(p[:, :, 0].mean())
    std = float(p[:, :, 0].std())
    out = p.astype(np.float64, copy=True)
    out[:, :, 0] = (out[:, :, 0] - mean) / (std + eps)
    return out, mean, std


def destandardize(channel: np.ndarray, mean: float, std: float, eps: float = STD_EPS) -> np.ndarray:
    return np.asarray(channel) * (std + eps) + mean
