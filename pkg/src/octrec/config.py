"""Run configuration: JSON with a strict schema.

Every key is optional and falls back to a default, but unknown keys and
wrong types are rejected up front with the offending dotted path, so typos
like ``lamda_c`` fail loudly instead of silently using a default.
"""
from __future__ import annotations

import json
from pathlib import Path

from .dataset import DatasetSpec, SceneFamily
from .errors import ConfigError
from .forward_model import K_LINEAR, LAMBDA_LINEAR, NoiseConfig, SweepConfig
from .model import ModelConfig
from .training import TrainConfig

_INT = "int"
_FLOAT = "float"
_BOOL = "bool"
_FRACTIONS = "fractions"

SCHEMA = {
    "seed": _INT,
    "sweep": {
        "center_wavelength_m": _FLOAT,
        "wavelength_span_m": _FLOAT,
        "n_samples": _INT,
        "sweep_duration_s": _FLOAT,
        "spectrum_fwhm_m": _FLOAT,
    },
    "scene": {
        "n_alines": _INT,
        "layers_min": _INT,
        "layers_max": _INT,
        "depth_frac_min": _FLOAT,
        "depth_frac_max": _FLOAT,
        "thickness_frac_min": _FLOAT,
        "thickness_frac_max": _FLOAT,
        "layer_reflectivity_min": _FLOAT,
        "layer_reflectivity_max": _FLOAT,
        "scatterers_min": _INT,
        "scatterers_max": _INT,
        "interface_probability": _FLOAT,
        "interface_reflectivity_min": _FLOAT,
        "interface_reflectivity_max": _FLOAT,
        "wobble_amp_frac_max": _FLOAT,
        "wobble_period_min": _FLOAT,
        "wobble_period_max": _FLOAT,
        "reference_reflectivity": _FLOAT,
    },
    "noise": {
        "randomize_phases": _BOOL,
        "detector_noise_std": _FLOAT,
    },
    "dataset": {
        "n_volumes": _INT,
        "frames_per_volume": _INT,
        "gt_repeats": _INT,
        "split_fractions": _FRACTIONS,
    },
    "model": {
        "base_channels": _INT,
        "levels": _INT,
    },
    "train": {
        "epochs": _INT,
        "batch_size": _INT,
        "learning_rate": _FLOAT,
        "beta1": _FLOAT,
        "beta2": _FLOAT,
        "eps": _FLOAT,
    },
    "metrics": {
        "db_span": _FLOAT,
        "sample_fraction": _FLOAT,
    },
    "simulate": {
        "n_frames": _INT,
        "grid": ("lambda", "k"),
    },
    "reconstruct": {
        "method": ("cubic", "linear"),
    },
    "bench": {
        "n_frames": _INT,
    },
}


def _validate(node, schema, path: str) -> None:
    if not isinstance(node, dict):
        raise ConfigError(f"config section {path or '<root>'} must be an object")
    for key, value in node.items():
        dotted = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigError(f"unknown config key: {dotted}")
        spec = schema[key]
        if isinstance(spec, dict):
            _validate(value, spec, dotted)
        elif spec == _INT:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"config key {dotted} must be an integer, got {value!r}")
        elif spec == _FLOAT:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"config key {dotted} must be a number, got {value!r}")
        elif spec == _BOOL:
            if not isinstance(value, bool):
                raise ConfigError(f"config key {dotted} must be a boolean, got {value!r}")
        elif spec == _FRACTIONS:
            ok = (isinstance(value, list) and len(value) == 3
                  and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value))
            if not ok:
                raise ConfigError(f"config key {dotted} must be a list of three numbers")
        elif isinstance(spec, tuple):
            if value not in spec:
                raise ConfigError(f"config key {dotted} must be one of {spec}, got {value!r}")
        else:  # pragma: no cover - schema table bug
            raise AssertionError(f"bad schema entry at {dotted}")


class RunConfig:
    """Validated configuration with typed accessors for each component."""

    def __init__(self, raw: dict | None = None):
        raw = raw or {}
        _validate(raw, SCHEMA, "")
        self.raw = raw

    def _section(self, name: str) -> dict:
        return self.raw.get(name, {})

    @property
    def seed(self) -> int:
        return int(self.raw.get("seed", 0))

    def sweep(self) -> SweepConfig:
        s = self._section("sweep")
        try:
            return SweepConfig(
                center_wavelength=float(s.get("center_wavelength_m", 1309e-9)),
                wavelength_span=float(s.get("wavelength_span_m", 100e-9)),
                n_samples=int(s.get("n_samples", 2304)),
                sweep_duration=float(s.get("sweep_duration_s", 1.0)),
                spectrum_fwhm=(float(s["spectrum_fwhm_m"]) if "spectrum_fwhm_m" in s else None),
            )
        except ValueError as exc:
            raise ConfigError(f"invalid sweep config: {exc}") from exc

    def scene_family(self) -> SceneFamily:
        s = self._section("scene")
        kwargs = {}
        mapping = {
            "layers_min": "layers_min", "layers_max": "layers_max",
            "depth_frac_min": "depth_frac_min", "depth_frac_max": "depth_frac_max",
            "thickness_frac_min": "thickness_frac_min", "thickness_frac_max": "thickness_frac_max",
            "layer_reflectivity_min": "layer_reflectivity_min",
            "layer_reflectivity_max": "layer_reflectivity_max",
            "scatterers_min": "scatterers_min", "scatterers_max": "scatterers_max",
            "interface_probability": "interface_probability",
            "interface_reflectivity_min": "interface_reflectivity_min",
            "interface_reflectivity_max": "interface_reflectivity_max",
            "wobble_amp_frac_max": "wobble_amp_frac_max",
            "wobble_period_min": "wobble_period_min", "wobble_period_max": "wobble_period_max",
            "reference_reflectivity": "reference_reflectivity",
        }
        for key, attr in mapping.items():
            if key in s:
                kwargs[attr] = s[key]
        try:
            return SceneFamily(**kwargs)
        except ValueError as exc:
            raise ConfigError(f"invalid scene config: {exc}") from exc

    @property
    def n_alines(self) -> int:
        return int(self._section("scene").get("n_alines", 1024))

    def noise(self) -> NoiseConfig:
        s = self._section("noise")
        try:
            return NoiseConfig(
                randomize_phases=bool(s.get("randomize_phases", True)),
                detector_noise_std=float(s.get("detector_noise_std", 1e-5)),
            )
        except ValueError as exc:
            raise ConfigError(f"invalid noise config: {exc}") from exc

    def dataset_spec(self) -> DatasetSpec:
        s = self._section("dataset")
        try:
            return DatasetSpec(
                sweep=self.sweep(),
                family=self.scene_family(),
                noise=self.noise(),
                n_volumes=int(s.get("n_volumes", 5)),
                frames_per_volume=int(s.get("frames_per_volume", 600)),
                n_alines=self.n_alines,
                gt_repeats=int(s.get("gt_repeats", 7)),
                split_fractions=tuple(s.get("split_fractions", (0.7, 0.2, 0.1))),
                resample_method=self.resample_method,
                seed=self.seed,
            )
        except ValueError as exc:
            raise ConfigError(f"invalid dataset config: {exc}") from exc

    def model(self) -> ModelConfig:
        s = self._section("model")
        try:
            return ModelConfig(base_channels=int(s.get("base_channels", 16)),
                               levels=int(s.get("levels", 4)))
        except ValueError as exc:
            raise ConfigError(f"invalid model config: {exc}") from exc

    def train(self) -> TrainConfig:
        s = self._section("train")
        try:
            return TrainConfig(
                epochs=int(s.get("epochs", 150)),
                batch_size=int(s.get("batch_size", 12)),
                learning_rate=float(s.get("learning_rate", 1e-4)),
                beta1=float(s.get("beta1", 0.9)),
                beta2=float(s.get("beta2", 0.999)),
                eps=float(s.get("eps", 1e-8)),
                seed=self.seed,
            )
        except ValueError as exc:
            raise ConfigError(f"invalid train config: {exc}") from exc

    @property
    def db_span(self) -> float:
        span = float(self._section("metrics").get("db_span", 60.0))
        if span <= 0.0:
            raise ConfigError(f"metrics.db_span must be positive, got {span}")
        return span

    @property
    def sample_fraction(self) -> float:
        frac = float(self._section("metrics").get("sample_fraction", 1.0))
        if not 0.0 < frac <= 1.0:
            raise ConfigError(f"metrics.sample_fraction must lie in (0, 1], got {frac}")
        return frac

    @property
    def simulate_n_frames(self) -> int:
        return int(self._section("simulate").get("n_frames", 4))

    @property
    def simulate_grid(self) -> str:
        return K_LINEAR if self._section("simulate").get("grid", "lambda") == "k" else LAMBDA_LINEAR

    @property
    def resample_method(self) -> str:
        return self._section("reconstruct").get("method", "cubic")

    @property
    def bench_n_frames(self) -> int:
        return int(self._section("bench").get("n_frames", 100))

    def with_seed(self, seed: int) -> "RunConfig":
        raw = dict(self.raw)
        raw["seed"] = int(seed)
        return RunConfig(raw)


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig({})
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{p}: top-level config must be a JSON object")
    return RunConfig(raw)
