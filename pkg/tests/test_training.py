import csv
import math
from pathlib import Path

import numpy as np
import pytest

from octrec.checkpoint import load_checkpoint, restore_model
from octrec.dataset import read_dataset_meta
from octrec.errors import ConfigError, NumericError
from octrec.forward_model import (
    FringeFrame,
    LAMBDA_LINEAR,
    SweepConfig,
    background_column,
    to_wavenumbers,
    uniform_k_grid,
    wavelength_grid,
)
from octrec.model import AttentionUNet, ModelConfig
from octrec.optim import Adam
from octrec.patches import STD_EPS, row_wavenumbers, normalize_wavenumbers
from octrec.pipeline import TAG_NETWORK
from octrec.training import (
    TrainConfig,
    build_patch_dataset,
    evaluate_rows,
    frame_to_patches,
    infer_volume,
    load_split_pairs,
    network_reconstruct,
    patches_to_frame,
    train_dataset,
    train_on_arrays,
    ws_channel_from_meta,
)


def _ws(n_rows):
    ks = row_wavenumbers(4.0e6, 5.0e6, n_rows)
    return normalize_wavenumbers(ks, 4.0e6, 5.0e6)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0.0)


def test_frame_to_patches_shapes_and_target_scaling():
    rng = np.random.default_rng(0)
    image = rng.normal(-40.0, 10.0, size=(16, 8))
    target = rng.normal(-40.0, 10.0, size=(16, 8))
    ws = _ws(16)
    x, y, stats = frame_to_patches(image, ws, target)
    assert x.shape == (4, 2, 4, 8)
    assert y.shape == (4, 1, 4, 8)
    assert len(stats) == 4
    for i in range(4):
        mean, std = stats[i]
        band = image[4 * i: 4 * (i + 1)]
        assert mean == pytest.approx(band.mean())
        assert std == pytest.approx(band.std())
        # target bands ride on the input band's statistics
        want = (target[4 * i: 4 * (i + 1)] - mean) / (std + STD_EPS)
        assert np.allclose(y[i, 0], want)
        assert np.allclose(x[i, 1], np.tile(ws[4 * i: 4 * (i + 1)][:, None], (1, 8)))


def test_patches_round_trip():
    rng = np.random.default_rng(1)
    image = rng.normal(-30.0, 12.0, size=(16, 8))
    x, stats = frame_to_patches(image, _ws(16))
    back = patches_to_frame(x[:, :1], stats)
    assert np.allclose(back, image, rtol=0, atol=1e-9)


def test_build_patch_dataset_stacks_frames():
    rng = np.random.default_rng(2)
    pairs = [(rng.normal(size=(16, 8)), rng.normal(size=(16, 8))) for _ in range(3)]
    x, y = build_patch_dataset(pairs, _ws(16))
    assert x.shape == (12, 2, 4, 8)
    assert y.shape == (12, 1, 4, 8)
    assert x.dtype == np.float32


def _toy_pool(n_patches=8, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n_patches, 2, 8, 8)).astype(np.float32)
    y = rng.normal(size=(n_patches, 1, 8, 8)).astype(np.float32)
    return x, y


def test_train_on_arrays_records_and_is_deterministic():
    def run():
        x, y = _toy_pool()
        model = AttentionUNet(ModelConfig(base_channels=2, levels=2), seed=0)
        opt = Adam(model.params, lr=1e-3)
        cfg = TrainConfig(epochs=3, batch_size=4, learning_rate=1e-3, seed=0)
        history = train_on_arrays(model, opt, x, y, x[:2], y[:2], cfg)
        return history, model

    h1, m1 = run()
    h2, m2 = run()
    assert [r.epoch for r in h1] == [1, 2, 3]
    assert all(np.isfinite(r.train_loss) and np.isfinite(r.val_loss) for r in h1)
    assert [(r.train_loss, r.val_loss) for r in h1] == [(r.train_loss, r.val_loss) for r in h2]
    for name in m1.params:
        assert np.array_equal(m1.params[name].data, m2.params[name].data)


def test_train_on_arrays_without_validation_pool():
    x, y = _toy_pool()
    model = AttentionUNet(ModelConfig(base_channels=2, levels=2), seed=0)
    opt = Adam(model.params, lr=1e-3)
    history = train_on_arrays(model, opt, x, y, None, None,
                              TrainConfig(epochs=1, batch_size=4, learning_rate=1e-3))
    assert math.isnan(history[0].val_loss)


def test_train_on_arrays_raises_on_non_finite_loss():
    x, y = _toy_pool()
    y[0] = np.nan
    model = AttentionUNet(ModelConfig(base_channels=2, levels=2), seed=0)
    opt = Adam(model.params, lr=1e-3)
    with pytest.raises(NumericError):
        train_on_arrays(model, opt, x, y, None, None,
                        TrainConfig(epochs=1, batch_size=8, learning_rate=1e-3))


def test_train_on_arrays_rejects_empty_pool():
    model = AttentionUNet(ModelConfig(base_channels=2, levels=2), seed=0)
    opt = Adam(model.params, lr=1e-3)
    with pytest.raises(ValueError):
        train_on_arrays(model, opt, np.zeros((0, 2, 8, 8)), np.zeros((0, 1, 8, 8)),
                        None, None, TrainConfig(epochs=1))


def test_loss_descends_on_tiny_overfit_problem():
    x, y = _toy_pool(n_patches=4, seed=3)
    model = AttentionUNet(ModelConfig(base_channels=2, levels=2), seed=1)
    opt = Adam(model.params, lr=1e-3)
    history = train_on_arrays(model, opt, x, y, None, None,
                              TrainConfig(epochs=20, batch_size=4, learning_rate=1e-3, seed=1))
    assert history[-1].train_loss < history[0].train_loss


def test_ws_channel_from_meta(tiny_dataset):
    meta = read_dataset_meta(tiny_dataset)
    ws = ws_channel_from_meta(meta, 32)
    assert ws.shape == (32,)
    assert ws[0] == pytest.approx(1.0)
    assert ws[-1] == pytest.approx(0.0)


def test_train_dataset_end_to_end(tiny_dataset, tmp_path):
    out = tmp_path / "run"
    cfg = TrainConfig(epochs=2, batch_size=8, learning_rate=1e-3, seed=0)
    result = train_dataset(tiny_dataset, out, ModelConfig(base_channels=2, levels=2), cfg)
    assert (out / "best.wun1").exists()
    assert (out / "final.wun1").exists()
    with open(result["history_path"]) as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["epoch", "train_loss", "val_loss"]
    assert len(rows) == 3
    assert np.isfinite(result["best_val_loss"])
    assert 1 <= result["best_epoch"] <= 2

    ck = load_checkpoint(result["best_path"])
    assert ck.config["model"]["base_channels"] == 2
    restored = restore_model(ck)
    x = np.random.default_rng(0).normal(size=(1, 2, 8, 8)).astype(np.float32)
    assert restored.predict(x).shape == (1, 1, 8, 8)

    # a rerun with the same seed reproduces the final checkpoint byte for byte
    out2 = tmp_path / "run2"
    train_dataset(tiny_dataset, out2, ModelConfig(base_channels=2, levels=2), cfg)
    assert (out / "final.wun1").read_bytes() == (out2 / "final.wun1").read_bytes()


def test_train_dataset_requires_pairs(tmp_path):
    (tmp_path / "manifest.json").write_text('{"kind": "paired_dataset", "k_min": 1, "k_max": 2}')
    with pytest.raises(ConfigError):
        train_dataset(tmp_path, tmp_path / "out", ModelConfig(base_channels=2, levels=2),
                      TrainConfig(epochs=1))


def _raw_volume(n_frames=2):
    cfg = SweepConfig(n_samples=64)
    k = to_wavenumbers(wavelength_grid(cfg))
    bg = background_column(k, cfg, 0.5)
    rng = np.random.default_rng(5)
    frames = [FringeFrame(bg[:, None] + rng.normal(0, 1e-4, size=(64, 8)), LAMBDA_LINEAR)
              for _ in range(n_frames)]
    target_k = uniform_k_grid(cfg.k_min, cfg.k_max, cfg.n_samples)
    ks = row_wavenumbers(cfg.k_min, cfg.k_max, 32)
    ws = normalize_wavenumbers(ks, cfg.k_min, cfg.k_max)
    return cfg, frames, bg, k, target_k, ws


def test_network_reconstruct_shape_and_tag():
    cfg, frames, bg, k, target_k, ws = _raw_volume()
    model = AttentionUNet(ModelConfig(base_channels=2, levels=2), seed=0)
    scan = network_reconstruct(model, frames[0], bg, ws)
    assert scan.tag == TAG_NETWORK
    assert scan.intensity.shape == (32, 8)
    assert np.all(np.isfinite(scan.intensity))


def test_infer_volume_timing_contract():
    cfg, frames, bg, k, target_k, ws = _raw_volume(3)
    model = AttentionUNet(ModelConfig(base_channels=2, levels=2), seed=0)
    nets, classics, timing = infer_volume(model, frames, bg, k, target_k, ws)
    assert len(nets) == len(classics) == 3
    assert timing["n_frames"] == 3
    assert timing["network_total_s"] > 0.0
    assert timing["classic_total_s"] > 0.0
    assert len(timing["network_per_frame_s"]) == 3
    assert timing["ratio_classic_over_network"] == pytest.approx(
        timing["classic_total_s"] / timing["network_total_s"])
    assert timing["network_total_s"] == pytest.approx(sum(timing["network_per_frame_s"]))


def test_evaluate_rows_variants_and_sampling(tiny_dataset):
    model = AttentionUNet(ModelConfig(base_channels=2, levels=2), seed=0)
    rows = evaluate_rows(tiny_dataset, model)
    n_test = len(load_split_pairs(tiny_dataset, "test"))
    assert len(rows) == 3 * n_test
    variants = {r.variant for r in rows}
    assert variants == {"input", "classic", "network"}
    for r in rows:
        assert np.isfinite(r.ssim)
        assert r.mse >= 0.0
    # classic baseline sits closer to the averaged truth than the blurred input
    by_variant = {v: np.mean([r.mse for r in rows if r.variant == v]) for v in variants}
    assert by_variant["classic"] < by_variant["input"]

    sampled = evaluate_rows(tiny_dataset, model, sample_fraction=0.5)
    assert len(sampled) == 3 * max(1, round(0.5 * n_test))
    again = evaluate_rows(tiny_dataset, model, sample_fraction=0.5)
    assert [r.sample for r in sampled] == [r.sample for r in again]
    with pytest.raises(ConfigError):
        evaluate_rows(tiny_dataset, model, sample_fraction=0.0)
    with pytest.raises(ConfigError):
        evaluate_rows(tiny_dataset, model, split="train", sample_fraction=2.0)
