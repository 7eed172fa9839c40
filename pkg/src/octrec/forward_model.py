"""Swept-source interferogram synthesis.

Models a swept laser whose wavelength ramps linearly in time, a Gaussian
source envelope over wavenumber, and a sample arm described by discrete
reflectors.  Produces raw fringe frames (spectral samples x A-lines) that
the spectral pipeline turns into B-scans.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

# Grid tags carried by fringe frames.
LAMBDA_LINEAR = "lambda_linear"
K_LINEAR = "k_linear"

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class SweepConfig:
    """Laser sweep: wavelength ramps linearly over one sweep period."""

    center_wavelength: float = 1309e-9  # m
    wavelength_span: float = 100e-9     # m, full sweep width
    n_samples: int = 2304               # spectral samples per A-line
    sweep_duration: float = 1.0         # s
    spectrum_fwhm: float | None = None  # m; defaults to half the span

    def __post_init__(self) -> None:
        if self.center_wavelength <= 0.0:
            raise ValueError(f"center_wavelength must be positive, got {self.center_wavelength}")
        if self.wavelength_span <= 0.0:
            raise ValueError(f"wavelength_span must be positive, got {self.wavelength_span}")
        if self.wavelength_span >= 2.0 * self.center_wavelength:
            raise ValueError("wavelength_span too wide: sweep would reach non-positive wavelengths")
        if self.n_samples < 2:
            raise ValueError(f"n_samples must be at least 2, got {self.n_samples}")
        if self.sweep_duration <= 0.0:
            raise ValueError(f"sweep_duration must be positive, got {self.sweep_duration}")
        if self.spectrum_fwhm is not None and self.spectrum_fwhm <= 0.0:
            raise ValueError(f"spectrum_fwhm must be positive, got {self.spectrum_fwhm}")

    @property
    def lambda_min(self) -> float:
        return self.center_wavelength - 0.5 * self.wavelength_span

    @property
    def lambda_max(self) -> float:
        return self.center_wavelength + 0.5 * self.wavelength_span

    @property
    def k_min(self) -> float:
        return TWO_PI / self.lambda_max

    @property
    def k_max(self) -> float:
        return TWO_PI / self.lambda_min

    @property
    def k_center(self) -> float:
        return TWO_PI / self.center_wavelength

    @property
    def sweep_rate(self) -> float:
        """Wavelength change per unit time (m/s)."""
        return self.wavelength_span / self.sweep_duration

    def effective_spectrum_fwhm(self) -> float:
        return self.spectrum_fwhm if self.spectrum_fwhm is not None else 0.5 * self.wavelength_span


def wavelength_grid(cfg: SweepConfig) -> np.ndarray:
    """Wavelengths sampled uniformly in time over one sweep, ascending."""
    return np.linspace(cfg.lambda_min, cfg.lambda_max, cfg.n_samples)


def to_wavenumbers(wavelengths: np.ndarray) -> np.ndarray:
    """k = 2*pi/lambda.  Ascending wavelengths give descending wavenumbers."""
    lam = np.asarray(wavelengths, dtype=np.float64)
    if lam.size == 0:
        raise ValueError("empty wavelength grid")
    if np.any(lam <= 0.0):
        raise ValueError("wavelengths must be positive")
    return TWO_PI / lam


def uniform_k_grid(k_min: float, k_max: float, n: int) -> np.ndarray:
    """n equally spaced wavenumbers from k_min to k_max, ascending."""
    if not k_min < k_max:
        raise ValueError(f"require k_min < k_max, got {k_min} >= {k_max}")
    if n < 2:
        raise ValueError(f"grid needs at least 2 points, got {n}")
    return np.linspace(k_min, k_max, n)


def source_spectrum(k: np.ndarray, cfg: SweepConfig) -> np.ndarray:
    """Gaussian source envelope over wavenumber, unit peak at the sweep center."""
    k = np.asarray(k, dtype=np.float64)
    fwhm_k = TWO_PI * cfg.effective_spectrum_fwhm() / cfg.center_wavelength**2
    return np.exp(-4.0 * np.log(2.0) * (k - cfg.k_center) ** 2 / fwhm_k**2)


def time_from_wavenumber(k: np.ndarray | float, cfg: SweepConfig, order: int | None = None) -> np.ndarray:
    """Sweep time offset (relative to the center-wavelength instant) at wavenumber k.

    The sweep is linear in wavelength, so time relates to wavenumber through
    the reciprocal map t = (2*pi*T/span) * (1/k - 1/k_c).  With ``order`` set,
    returns the power-series truncation in u = k/k_c - 1 to that order; the
    series terms alternate in sign because 1/(1+u) - 1 = -u + u^2 - u^3 + ...
    """
    k = np.asarray(k, dtype=np.float64)
    if np.any(k <= 0.0):
        raise ValueError("wavenumbers must be positive")
    prefactor = TWO_PI * cfg.sweep_duration / cfg.wavelength_span
    if order is None:
        return prefactor * (1.0 / k - 1.0 / cfg.k_center)
    if order < 1:
        raise ValueError(f"series order must be >= 1, got {order}")
    u = k / cfg.k_center - 1.0
    acc = np.zeros_like(u)
    term = np.ones_like(u)
    for n in range(1, order + 1):
        term = term * (-u)
        acc = acc + term
    return (prefactor / cfg.k_center) * acc


def max_imaging_depth(cfg: SweepConfig) -> float:
    """One-sided alias-free depth for the sweep's uniform-k grid (m)."""
    spacing = (cfg.k_max - cfg.k_min) / (cfg.n_samples - 1)
    return np.pi / (2.0 * spacing)


# --- Sample description -----------------------------------------------------


@dataclass(frozen=True)
class Reflector:
    depth: float          # m, measured from the zero-delay reference
    reflectivity: float   # intensity reflectivity in [0, 1]
    phase: float = 0.0    # rad

    def __post_init__(self) -> None:
        if self.depth < 0.0:
            raise ValueError(f"reflector depth must be >= 0, got {self.depth}")
        if not 0.0 <= self.reflectivity <= 1.0:
            raise ValueError(f"reflectivity must lie in [0, 1], got {self.reflectivity}")


@dataclass(frozen=True)
class Phantom:
    """Discrete-reflector description of one A-line's sample arm."""

    reflectors: tuple[Reflector, ...]
    reference_reflectivity: float = 0.5
    reference_depth: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "reflectors", tuple(self.reflectors))
        if not 0.0 <= self.reference_reflectivity <= 1.0:
            raise ValueError("reference_reflectivity must lie in [0, 1]")
        if self.reference_depth < 0.0:
            raise ValueError("reference_depth must be >= 0")

    def check_depths(self, max_depth: float) -> None:
        for r in self.reflectors:
            if r.depth >= max_depth:
                raise ValueError(f"reflector at {r.depth} m exceeds max imaging depth {max_depth} m")

    def with_phases(self, phases: np.ndarray) -> "Phantom":
        if len(phases) != len(self.reflectors):
            raise ValueError("phase count does not match reflector count")
        new = tuple(Reflector(r.depth, r.reflectivity, float(p)) for r, p in zip(self.reflectors, phases))
        return Phantom(new, self.reference_reflectivity, self.reference_depth)


@dataclass(frozen=True)
class NoiseConfig:
    """Per-acquisition randomness: speckle phases and detector noise."""

    randomize_phases: bool = False
    detector_noise_std: float = 0.0

    def __post_init__(self) -> None:
        if self.detector_noise_std < 0.0:
            raise ValueError("detector_noise_std must be >= 0")


@dataclass
class FringeFrame:
    """Raw spectral interferogram: n_samples rows x n_alines columns."""

    samples: np.ndarray
    grid_tag: str

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples)
        if self.samples.ndim != 2:
            raise ValueError(f"fringe frame must be 2-D, got shape {self.samples.shape}")
        if self.grid_tag not in (LAMBDA_LINEAR, K_LINEAR):
            raise ValueError(f"unknown grid tag {self.grid_tag!r}")

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def n_alines(self) -> int:
        return self.samples.shape[1]


# --- Synthesis ---------------------------------------------------------------


def synthesize_fringe(
    phantom: Phantom,
    k_values: np.ndarray,
    cfg: SweepConfig,
    include_autocorrelation: bool = False,
) -> np.ndarray:
    """Interferogram of one A-line sampled at the given wavenumbers.

    I(k) = S(k)/4 * [R^2 + sum_m 2 R sqrt(s_m) cos(2 k (d_m - d_R) + phi_m)]
    with an optional sample-arm autocorrelation sum over reflector pairs.
    """
    k = np.asarray(k_values, dtype=np.float64)
    if k.ndim != 1:
        raise ValueError("k_values must be 1-D")
    spectrum = source_spectrum(k, cfg)
    r_ref = phantom.reference_reflectivity
    total = np.full(k.shape, r_ref**2, dtype=np.float64)
    if phantom.reflectors:
        depths = np.array([r.depth for r in phantom.reflectors])
        amps = np.sqrt([r.reflectivity for r in phantom.reflectors])
        phases = np.array([r.phase for r in phantom.reflectors])
        args = 2.0 * np.outer(k, depths - phantom.reference_depth) + phases
        total = total + 2.0 * r_ref * (np.cos(args) @ amps)
        if include_autocorrelation:
            dd = depths[:, None] - depths[None, :]
            pp = phases[:, None] - phases[None, :]
            aa = np.outer(amps, amps)
            args_ac = 2.0 * k[:, None, None] * dd[None, :, :] + pp[None, :, :]
            total = total + np.einsum("kmn,mn->k", np.cos(args_ac), aa)
    return 0.25 * spectrum * total


def background_column(k_values: np.ndarray, cfg: SweepConfig, reference_reflectivity: float) -> np.ndarray:
    """Reference-arm-only interferogram: what the detector sees with no sample."""
    empty = Phantom((), reference_reflectivity=reference_reflectivity)
    return synthesize_fringe(empty, k_values, cfg)


def synthesize_volume(
    phantoms: Sequence[Phantom],
    cfg: SweepConfig,
    n_alines: int,
    n_repeats: int = 1,
    noise: NoiseConfig | None = None,
    seed: int = 0,
    grid: str = LAMBDA_LINEAR,
    include_autocorrelation: bool = False,
) -> list[FringeFrame]:
    """Repeated fringe frames of one scene.

    ``phantoms`` holds either a single phantom replicated across all A-lines
    or one phantom per A-line.  Repeats share the scene; with phase
    randomization enabled each (repeat, column) draws fresh speckle phases,
    so repeats differ only in speckle and detector noise.
    """
    if n_alines < 1:
        raise ValueError("n_alines must be >= 1")
    if n_repeats < 1:
        raise ValueError("n_repeats must be >= 1")
    if len(phantoms) not in (1, n_alines):
        raise ValueError(f"need 1 or {n_alines} phantoms, got {len(phantoms)}")
    if grid == LAMBDA_LINEAR:
        k = to_wavenumbers(wavelength_grid(cfg))
    elif grid == K_LINEAR:
        k = uniform_k_grid(cfg.k_min, cfg.k_max, cfg.n_samples)
    else:
        raise ValueError(f"unknown grid {grid!r}")
    noise = noise or NoiseConfig()

    frames = []
    for rep in range(n_repeats):
        cols = np.empty((cfg.n_samples, n_alines), dtype=np.float64)
        for c in range(n_alines):
            phantom = phantoms[c if len(phantoms) > 1 else 0]
            rng = np.random.default_rng([seed, rep, c])
            if noise.randomize_phases and phantom.reflectors:
                phantom = phantom.with_phases(rng.uniform(0.0, TWO_PI, len(phantom.reflectors)))
            col = synthesize_fringe(phantom, k, cfg, include_autocorrelation)
            if noise.detector_noise_std > 0.0:
                col = col + rng.normal(0.0, noise.detector_noise_std, col.shape)
            cols[:, c] = col
        frames.append(FringeFrame(cols, grid_tag=grid))
    return frames
