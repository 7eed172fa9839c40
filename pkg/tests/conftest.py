"""Shared oracles and helpers for the test suite."""
from __future__ import annotations

import numpy as np
import pytest

from octrec.dataset import DatasetSpec, generate_dataset
from octrec.forward_model import NoiseConfig, SweepConfig


def idft_oracle(x: np.ndarray) -> np.ndarray:
    """Direct O(N^2) inverse DFT: out[p] = (1/N) sum_j x[j] exp(+2i pi j p / N)."""
    x = np.asarray(x)
    n = x.shape[0]
    j = np.arange(n)
    w = np.exp(2j * np.pi * np.outer(j, j) / n) / n
    return w @ x


def fd_gradient(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar f with respect to array x."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gf[i] = (fp - fm) / (2.0 * h)
    return g


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    """Max absolute difference normalized by the larger magnitude scale."""
    a = np.asarray(a)
    b = np.asarray(b)
    scale = max(np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0), 1e-12)
    return float(np.abs(a - b).max(initial=0.0) / scale)


@pytest.fixture
def small_sweep() -> SweepConfig:
    return SweepConfig(n_samples=256)


def tiny_dataset_spec(seed: int = 42) -> DatasetSpec:
    return DatasetSpec(
        sweep=SweepConfig(n_samples=64),
        noise=NoiseConfig(randomize_phases=True, detector_noise_std=1e-5),
        n_volumes=2,
        frames_per_volume=4,
        n_alines=16,
        gt_repeats=2,
        split_fractions=(0.5, 0.25, 0.25),
        seed=seed,
    )


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory) -> str:
    """A small generated dataset shared across tests (8 frames, 32x16 images)."""
    root = tmp_path_factory.mktemp("dataset")
    generate_dataset(tiny_dataset_spec(), root)
    return str(root)
