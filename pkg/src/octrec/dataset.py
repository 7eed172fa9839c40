"""Synthetic paired datasets: blurred direct-transform inputs vs averaged
classic reconstructions.

Each volume gets a randomly drawn layered scene. Every frame realizes that
scene with fresh scatterer positions, then several speckle realizations are
synthesized: realization 0 becomes the network input (direct wavelength-space
transform), realizations 1..R are classically reconstructed and averaged into
the ground truth.  The input frame's own classic reconstruction is stored
alongside for baseline comparisons.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataFormatError
from .forward_model import (K_LINEAR, LAMBDA_LINEAR, NoiseConfig, Phantom, Reflector,
                            SweepConfig, background_column, max_imaging_depth,
                            synthesize_volume, to_wavenumbers, uniform_k_grid,
                            wavelength_grid)
from .pipeline import average_bscans, classic_reconstruct, lambda_space_image
from . import io as oio


@dataclass(frozen=True)
class SceneFamily:
    """Ranges that random layered scenes are drawn from.

    Depth-like quantities are fractions of the sweep's alias-free depth.
    """

    layers_min: int = 2
    layers_max: int = 4
    depth_frac_min: float = 0.08
    depth_frac_max: float = 0.62
    thickness_frac_min: float = 0.04
    thickness_frac_max: float = 0.16
    layer_reflectivity_min: float = 2e-5
    layer_reflectivity_max: float = 4e-4
    scatterers_min: int = 40
    scatterers_max: int = 90
    interface_probability: float = 0.7
    interface_reflectivity_min: float = 5e-4
    interface_reflectivity_max: float = 4e-3
    wobble_amp_frac_max: float = 0.03
    wobble_period_min: float = 24.0
    wobble_period_max: float = 160.0
    reference_reflectivity: float = 0.5

    def __post_init__(self) -> None:
        if not 1 <= self.layers_min <= self.layers_max:
            raise ValueError("need 1 <= layers_min <= layers_max")
        if not 0.0 < self.depth_frac_min < self.depth_frac_max < 1.0:
            raise ValueError("depth fractions must satisfy 0 < min < max < 1")
        if self.scatterers_min < 1 or self.scatterers_max < self.scatterers_min:
            raise ValueError("bad scatterer count range")
        if not 0.0 <= self.interface_probability <= 1.0:
            raise ValueError("interface_probability must lie in [0, 1]")


@dataclass(frozen=True)
class _Layer:
    top: float
    thickness: float
    reflectivity: float
    n_scatterers: int
    wobble_amp: float
    wobble_period: float
    wobble_phase: float
    interface_reflectivity: float  # 0 disables the bright boundary line


@dataclass(frozen=True)
class Scene:
    layers: tuple[_Layer, ...]
    frame_drift: float
    reference_reflectivity: float


def sample_scene(family: SceneFamily, d_max: float, rng: np.random.Generator) -> Scene:
    n_layers = int(rng.integers(family.layers_min, family.layers_max + 1))
    layers = []
    for _ in range(n_layers):
        thickness = rng.uniform(family.thickness_frac_min, family.thickness_frac_max) * d_max
        amp = rng.uniform(0.0, family.wobble_amp_frac_max) * d_max
        top_lo = family.depth_frac_min * d_max + amp
        top_hi = family.depth_frac_max * d_max - thickness - amp
        top = rng.uniform(top_lo, max(top_lo, top_hi))
        interface = 0.0
        if rng.uniform() < family.interface_probability:
            interface = rng.uniform(family.interface_reflectivity_min,
                                    family.interface_reflectivity_max)
        layers.append(_Layer(
            top=top,
            thickness=thickness,
            reflectivity=rng.uniform(family.layer_reflectivity_min,
                                     family.layer_reflectivity_max),
            n_scatterers=int(rng.integers(family.scatterers_min, family.scatterers_max + 1)),
            wobble_amp=amp,
            wobble_period=rng.uniform(family.wobble_period_min, family.wobble_period_max),
            wobble_phase=rng.uniform(0.0, 2.0 * np.pi),
            interface_reflectivity=interface,
        ))
    return Scene(layers=tuple(sorted(layers, key=lambda l: l.top)),
                 frame_drift=rng.uniform(0.05, 0.3),
                 reference_reflectivity=family.reference_reflectivity)


def scene_phantoms(scene: Scene, n_alines: int, frame_index: int,
                   rng: np.random.Generator) -> list[Phantom]:
    """One phantom per A-line; scatterer positions come from ``rng`` so
    consecutive frames share structure but not micro-texture."""
    phantoms = []
    for c in range(n_alines):
        reflectors: list[Reflector] = []
        for layer in scene.layers:
            phase = layer.wobble_phase + frame_index * scene.frame_drift
            top_c = layer.top + layer.wobble_amp * math.sin(
                2.0 * np.pi * c / layer.wobble_period + phase)
            if layer.interface_reflectivity > 0.0:
                reflectors.append(Reflector(top_c, layer.interface_reflectivity))
            per = layer.reflectivity / layer.n_scatterers
            for d in rng.uniform(top_c, top_c + layer.thickness, layer.n_scatterers):
                reflectors.append(Reflector(float(d), per))
        phantoms.append(Phantom(tuple(reflectors),
                                reference_reflectivity=scene.reference_reflectivity))
    return phantoms


# --- Split arithmetic ----------------------------------------------------------


def split_counts(n_items: int, fractions: tuple[float, float, float]) -> tuple[int, int, int]:
    """Floor the validation/test counts; training absorbs the remainder."""
    if n_items < 0:
        raise ValueError("n_items must be >= 0")
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise ValueError("need three non-negative split fractions")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"split fractions must sum to 1, got {sum(fractions)}")
    n_val = int(math.floor(fractions[1] * n_items))
    n_test = int(math.floor(fractions[2] * n_items))
    n_train = n_items - n_val - n_test
    return n_train, n_val, n_test


def split_dataset(n_items: int, fractions: tuple[float, float, float],
                  seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Disjoint, exhaustive index sets for train/val/test via a seeded shuffle."""
    n_train, n_val, n_test = split_counts(n_items, fractions)
    perm = np.random.default_rng([seed, 101]).permutation(n_items)
    train = np.sort(perm[:n_train])
    val = np.sort(perm[n_train:n_train + n_val])
    test = np.sort(perm[n_train + n_val:])
    return train, val, test


# --- Generation -----------------------------------------------------------------

SPLIT_NAMES = ("train", "val", "test")


@dataclass(frozen=True)
class DatasetSpec:
    sweep: SweepConfig
    family: SceneFamily = field(default_factory=SceneFamily)
    noise: NoiseConfig = field(default_factory=lambda: NoiseConfig(randomize_phases=True,
                                                                   detector_noise_std=1e-5))
    n_volumes: int = 5
    frames_per_volume: int = 600
    n_alines: int = 1024
    gt_repeats: int = 7
    split_fractions: tuple[float, float, float] = (0.7, 0.2, 0.1)
    resample_method: str = "cubic"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_volumes < 1 or self.frames_per_volume < 1:
            raise ValueError("need at least one volume and one frame per volume")
        if self.n_alines < 1:
            raise ValueError("n_alines must be >= 1")
        if self.gt_repeats < 1:
            raise ValueError("gt_repeats must be >= 1")
        split_counts(0, self.split_fractions)


def frame_seed(seed: int, volume: int, frame: int) -> int:
    return int(np.random.SeedSequence([seed, volume, frame]).generate_state(1)[0])


def generate_frame(spec: DatasetSpec, scene: Scene, volume: int, frame: int):
    """Synthesize one frame: (input dB image, ground-truth dB image, classic dB image)."""
    cfg = spec.sweep
    source_k = to_wavenumbers(wavelength_grid(cfg))
    target_k = uniform_k_grid(cfg.k_min, cfg.k_max, cfg.n_samples)
    background = background_column(source_k, cfg, scene.reference_reflectivity)
    pos_rng = np.random.default_rng([spec.seed, volume, frame, 7])
    phantoms = scene_phantoms(scene, spec.n_alines, frame, pos_rng)
    frames = synthesize_volume(phantoms, cfg, spec.n_alines,
                               n_repeats=1 + spec.gt_repeats, noise=spec.noise,
                               seed=frame_seed(spec.seed, volume, frame))
    input_scan = lambda_space_image(frames[0], background)
    classics = [classic_reconstruct(f, background, source_k, target_k,
                                    method=spec.resample_method) for f in frames]
    truth = average_bscans(classics[1:])
    return input_scan.intensity, truth.intensity, classics[0].intensity


def generate_dataset(spec: DatasetSpec, out_dir: str | Path, quiet: bool = True) -> dict:
    """Write PAIR files (plus per-frame classic baselines) under split dirs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_frames = spec.n_volumes * spec.frames_per_volume
    assignment = np.empty(n_frames, dtype=np.int8)
    for s, idx in enumerate(split_dataset(n_frames, spec.split_fractions, spec.seed)):
        assignment[idx] = s

    files: list[Path] = []
    counts = [0, 0, 0]
    for volume in range(spec.n_volumes):
        scene = sample_scene(spec.family, max_imaging_depth(spec.sweep),
                             np.random.default_rng([spec.seed, volume, 3]))
        for frame in range(spec.frames_per_volume):
            flat = volume * spec.frames_per_volume + frame
            split = SPLIT_NAMES[assignment[flat]]
            counts[assignment[flat]] += 1
            vol_dir = out / split / f"vol{volume:03d}"
            vol_dir.mkdir(parents=True, exist_ok=True)
            inp, truth, classic = generate_frame(spec, scene, volume, frame)
            pair_path = vol_dir / f"frame{frame:03d}.pair"
            classic_path = vol_dir / f"frame{frame:03d}.classic.frg1"
            oio.write_pair(pair_path, inp.astype(np.float32), truth.astype(np.float32),
                           input_tag=LAMBDA_LINEAR, target_tag=K_LINEAR)
            oio.write_frg1(classic_path, classic.astype(np.float32), K_LINEAR)
            files.extend([pair_path, classic_path])
            if not quiet and frame == 0:
                print(f"dataset: volume {volume} -> {split} (first frame written)")
    meta = dataset_meta(spec, counts)
    oio.write_manifest(out, files, extra=meta)
    return meta


def dataset_meta(spec: DatasetSpec, counts: list[int]) -> dict:
    cfg = spec.sweep
    return {
        "kind": "paired_dataset",
        "sweep": {
            "center_wavelength_m": cfg.center_wavelength,
            "wavelength_span_m": cfg.wavelength_span,
            "n_samples": cfg.n_samples,
            "sweep_duration_s": cfg.sweep_duration,
            "spectrum_fwhm_m": cfg.effective_spectrum_fwhm(),
        },
        "k_min": cfg.k_min,
        "k_max": cfg.k_max,
        "n_volumes": spec.n_volumes,
        "frames_per_volume": spec.frames_per_volume,
        "n_alines": spec.n_alines,
        "gt_repeats": spec.gt_repeats,
        "split_fractions": list(spec.split_fractions),
        "split_counts": {name: counts[i] for i, name in enumerate(SPLIT_NAMES)},
        "resample_method": spec.resample_method,
        "seed": spec.seed,
        "noise": {
            "randomize_phases": spec.noise.randomize_phases,
            "detector_noise_std": spec.noise.detector_noise_std,
        },
    }


# --- Loading ---------------------------------------------------------------------


def read_dataset_meta(dataset_dir: str | Path) -> dict:
    path = Path(dataset_dir) / "manifest.json"
    if not path.exists():
        raise ConfigError(f"no manifest.json under {dataset_dir}; not a generated dataset?")
    import json

    meta = json.loads(path.read_text())
    if meta.get("kind") != "paired_dataset":
        raise DataFormatError(f"{path}: manifest does not describe a paired dataset")
    return meta


def list_pairs(dataset_dir: str | Path, split: str) -> list[Path]:
    if split not in SPLIT_NAMES:
        raise ValueError(f"unknown split {split!r}")
    root = Path(dataset_dir) / split
    if not root.is_dir():
        return []
    return sorted(root.glob("vol*/frame*.pair"))


def sample_name(pair_path: Path) -> str:
    return f"{pair_path.parent.name}/{pair_path.stem}"


def classic_path_for(pair_path: Path) -> Path:
    return pair_path.with_name(pair_path.stem + ".classic.frg1")
