"""Spectral-domain processing that turns raw fringes into B-scans.

Two routes share the same tail (window, inverse DFT, log magnitude,
conjugate truncation): the direct route transforms the wavelength-sampled
fringe as-is, while the classic route first resamples it onto a uniform
wavenumber grid so depth structure stays sharp.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .forward_model import FringeFrame, K_LINEAR

DB_FLOOR = 1e-12

# B-scan provenance tags.
TAG_LAMBDA_SPACE = "lambda_space"
TAG_K_RESAMPLED = "k_resampled"
TAG_GROUND_TRUTH = "ground_truth"
TAG_NETWORK = "network_output"

_TAGS = (TAG_LAMBDA_SPACE, TAG_K_RESAMPLED, TAG_GROUND_TRUTH, TAG_NETWORK)


@dataclass
class BScan:
    """Depth-resolved intensity image in dB; rows are depth bins."""

    intensity: np.ndarray
    tag: str

    def __post_init__(self) -> None:
        self.intensity = np.asarray(self.intensity)
        if self.intensity.ndim != 2:
            raise ValueError(f"B-scan must be 2-D, got shape {self.intensity.shape}")
        if self.tag not in _TAGS:
            raise ValueError(f"unknown B-scan tag {self.tag!r}")

    @property
    def depth_axis(self) -> np.ndarray:
        return np.arange(self.intensity.shape[0])


def subtract_background(frame: FringeFrame, background: np.ndarray) -> FringeFrame:
    """Remove the reference-arm spectrum from every A-line."""
    bg = np.asarray(background, dtype=np.float64)
    if bg.ndim != 1 or bg.shape[0] != frame.n_samples:
        raise ValueError(f"background length {bg.shape} does not match {frame.n_samples} samples")
    return FringeFrame(frame.samples - bg[:, None], grid_tag=frame.grid_tag)


def hann_window(n: int) -> np.ndarray:
    """Symmetric raised-cosine window, zero at both ends."""
    if n < 2:
        raise ValueError(f"window length must be >= 2, got {n}")
    j = np.arange(n)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * j / (n - 1)))


def apply_hann(frame: FringeFrame) -> FringeFrame:
    w = hann_window(frame.n_samples)
    return FringeFrame(frame.samples * w[:, None], grid_tag=frame.grid_tag)


def idft_columns(samples: np.ndarray) -> np.ndarray:
    """Inverse DFT down each column: out[p] = (1/N) sum_j in[j] exp(+2i pi j p / N)."""
    samples = np.asarray(samples)
    if samples.ndim not in (1, 2):
        raise ValueError("expected a column or a 2-D frame")
    if samples.shape[0] < 1:
        raise ValueError("empty input")
    return np.fft.ifft(samples, axis=0)


def magnitude_db(z: np.ndarray) -> np.ndarray:
    """20*log10 of magnitude with a small floor so zeros stay finite."""
    return 20.0 * np.log10(np.abs(z) + DB_FLOOR)


def truncate_conjugate(image: np.ndarray) -> np.ndarray:
    """Keep the lower half of the depth axis (real input mirrors the rest)."""
    n = image.shape[0]
    if n % 2 != 0:
        raise ValueError(f"depth axis must have even length to halve, got {n}")
    return image[: n // 2]


def lambda_space_image(frame: FringeFrame, background: np.ndarray) -> BScan:
    """Direct transform of the wavelength-sampled fringe, no resampling."""
    work = apply_hann(subtract_background(frame, background))
    img = truncate_conjugate(magnitude_db(idft_columns(work.samples)))
    return BScan(img, tag=TAG_LAMBDA_SPACE)


def resample_to_linear_k(
    frame: FringeFrame,
    source_k: np.ndarray,
    target_k: np.ndarray,
    method: str = "cubic",
) -> FringeFrame:
    """Interpolate each A-line from its native wavenumber grid onto a uniform one.

    The cubic method fits a natural spline per column; the linear method
    interpolates piecewise.  Targets must lie inside the source range.
    """
    src = np.asarray(source_k, dtype=np.float64)
    tgt = np.asarray(target_k, dtype=np.float64)
    if src.ndim != 1 or src.shape[0] != frame.n_samples:
        raise ValueError("source_k must match the frame's sample count")
    diffs = np.diff(src)
    if np.all(diffs > 0):
        ascending = frame.samples
    elif np.all(diffs < 0):
        src = src[::-1]
        ascending = frame.samples[::-1]
    else:
        raise ValueError("source_k must be strictly monotonic")
    if tgt.ndim != 1 or np.any(np.diff(tgt) <= 0):
        raise ValueError("target_k must be strictly ascending")
    if tgt[0] < src[0] or tgt[-1] > src[-1]:
        raise ValueError("target grid extends outside the source wavenumber range")
    if method == "cubic":
        spline = CubicSpline(src, ascending, axis=0, bc_type="natural")
        out = spline(tgt)
    elif method == "linear":
        out = np.empty((tgt.shape[0], frame.n_alines), dtype=np.float64)
        for c in range(frame.n_alines):
            out[:, c] = np.interp(tgt, src, ascending[:, c])
    else:
        raise ValueError(f"unknown resampling method {method!r}")
    return FringeFrame(out, grid_tag=K_LINEAR)


def classic_reconstruct(
    frame: FringeFrame,
    background: np.ndarray,
    source_k: np.ndarray,
    target_k: np.ndarray,
    method: str = "cubic",
) -> BScan:
    """Standard reconstruction: linearize in wavenumber, then transform."""
    work = subtract_background(frame, background)
    work = resample_to_linear_k(work, source_k, target_k, method=method)
    work = apply_hann(work)
    img = truncate_conjugate(magnitude_db(idft_columns(work.samples)))
    return BScan(img, tag=TAG_K_RESAMPLED)


def average_bscans(scans: list[BScan]) -> BScan:
    """Elementwise mean across repeats; the result serves as ground truth."""
    if not scans:
        raise ValueError("need at least one B-scan to average")
    shape = scans[0].intensity.shape
    for s in scans[1:]:
        if s.intensity.shape != shape:
            raise ValueError("B-scan shapes differ")
    stack = np.stack([s.intensity for s in scans])
    return BScan(stack.mean(axis=0), tag=TAG_GROUND_TRUTH)


def db_to_linear(db: np.ndarray) -> np.ndarray:
    return np.power(10.0, np.asarray(db) / 20.0)


def psf_fwhm(column: np.ndarray, peak_bin: int) -> float:
    """Full width at half maximum around a peak, in fractional bins.

    Operates on linear magnitude (convert dB first).  Crossings are located
    by linear interpolation between samples; a peak whose half level is never
    crossed before the array boundary is a measurement error.
    """
    col = np.asarray(column, dtype=np.float64)
    if col.ndim != 1:
        raise ValueError("column must be 1-D")
    n = col.shape[0]
    if not 0 <= peak_bin < n:
        raise ValueError(f"peak_bin {peak_bin} outside column of length {n}")
    left_ok = peak_bin == 0 or col[peak_bin] >= col[peak_bin - 1]
    right_ok = peak_bin == n - 1 or col[peak_bin] >= col[peak_bin + 1]
    if not (left_ok and right_ok):
        raise ValueError(f"no local maximum at bin {peak_bin}")
    half = 0.5 * col[peak_bin]

    i = peak_bin
    while i > 0 and col[i - 1] > half:
        i -= 1
    if i == 0:
        raise ValueError("half level never crossed on the left side")
    x_left = (i - 1) + (half - col[i - 1]) / (col[i] - col[i - 1])

    i = peak_bin
    while i < n - 1 and col[i + 1] > half:
        i += 1
    if i == n - 1:
        raise ValueError("half level never crossed on the right side")
    x_right = (i + 1) - (half - col[i + 1]) / (col[i] - col[i + 1])
    return float(x_right - x_left)
