import numpy as np
import pytest

from octrec.autodiff import Tensor, mse_loss, zero_grads
from octrec.model import AttentionUNet, ModelConfig


def _tiny():
    return ModelConfig(base_channels=2, levels=4)


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(base_channels=3)
    with pytest.raises(ValueError):
        ModelConfig(base_channels=0)
    with pytest.raises(ValueError):
        ModelConfig(levels=0)
    with pytest.raises(ValueError):
        ModelConfig(in_channels=0)


def test_patch_extent_check():
    cfg = _tiny()
    cfg.check_patch_extents(16, 32)
    with pytest.raises(ValueError):
        cfg.check_patch_extents(20, 32)
    with pytest.raises(ValueError):
        cfg.check_patch_extents(16, 24)
    with pytest.raises(ValueError):
        ModelConfig(levels=5).check_patch_extents(16, 32)


def test_encoder_channels_double_per_level():
    assert ModelConfig(base_channels=4).encoder_channels() == [4, 8, 16, 32]
    assert ModelConfig(base_channels=16, levels=2).encoder_channels() == [16, 32]


def test_parameter_census_for_small_config():
    model = AttentionUNet(_tiny(), seed=0)
    assert model.param_count() == 36311
    assert len(model.params) == 118
    assert len(model.buffers) == 36
    assert model.param_count() == sum(p.data.size for p in model.params.values())


def test_init_statistics_and_determinism():
    a = AttentionUNet(_tiny(), seed=3)
    b = AttentionUNet(_tiny(), seed=3)
    c = AttentionUNet(_tiny(), seed=4)
    for name in a.params:
        assert np.array_equal(a.params[name].data, b.params[name].data)
    assert any(not np.array_equal(a.params[n].data, c.params[n].data) for n in a.params)
    assert np.all(a.params["enc1.conv1.bias"].data == 0.0)
    assert np.all(a.params["enc1.bn1.gamma"].data == 1.0)
    assert np.all(a.params["enc1.bn1.beta"].data == 0.0)
    assert np.all(a.buffers["enc1.bn1.running_mean"].data == 0.0)
    assert np.all(a.buffers["enc1.bn1.running_var"].data == 1.0)
    # fan-in scaled spread, checked loosely on the widest kernel
    w = AttentionUNet(ModelConfig(base_channels=16), seed=0).params["mid.conv2.weight"].data
    assert w.std() == pytest.approx(np.sqrt(2.0 / (w.shape[1] * 9)), rel=0.05)


def test_forward_shapes_and_input_validation():
    model = AttentionUNet(_tiny(), seed=0, dtype=np.float64)
    x = np.random.default_rng(0).normal(size=(2, 2, 16, 32))
    out = model.forward(Tensor(x), training=True)
    assert out.data.shape == (2, 1, 16, 32)
    out_eval = model.forward(Tensor(x), training=False)
    assert out_eval.data.shape == (2, 1, 16, 32)
    with pytest.raises(ValueError):
        model.forward(Tensor(x[:, :1]))
    with pytest.raises(ValueError):
        model.forward(Tensor(x[:, :, :12]))
    with pytest.raises(ValueError):
        model.forward(Tensor(x[0]))


def test_eval_forward_is_pure_training_updates_buffers():
    model = AttentionUNet(_tiny(), seed=1, dtype=np.float64)
    x = np.random.default_rng(1).normal(size=(1, 2, 16, 16))
    before = model.buffers["enc1.bn1.running_mean"].data.copy()
    a = model.predict(x)
    b = model.predict(x)
    assert np.array_equal(a, b)
    assert np.array_equal(model.buffers["enc1.bn1.running_mean"].data, before)
    model.forward(Tensor(x), training=True)
    assert not np.array_equal(model.buffers["enc1.bn1.running_mean"].data, before)


def test_predict_matches_types():
    model = AttentionUNet(_tiny(), seed=0)
    out = model.predict(np.zeros((1, 2, 16, 16)))
    assert isinstance(out, np.ndarray)
    assert out.dtype == np.float32
    assert out.shape == (1, 1, 16, 16)


def test_residual_block_reduces_to_shortcut_when_convs_are_zero():
    model = AttentionUNet(_tiny(), seed=2, dtype=np.float64)
    for block in ("enc1", "enc2"):
        for key in (f"{block}.conv1.weight", f"{block}.conv1.bias",
                    f"{block}.conv2.weight", f"{block}.conv2.bias"):
            model.params[key].data = np.zeros_like(model.params[key].data)
    x = np.random.default_rng(2).normal(size=(1, 2, 8, 8))
    # matching channel counts use an identity shortcut
    assert "enc1.shortcut.weight" not in model.params
    got1 = model._block("enc1", Tensor(x), training=False).data
    assert np.allclose(got1, np.maximum(x, 0.0), atol=1e-12)
    # widening blocks project with a 1x1 conv
    got2 = model._block("enc2", Tensor(x), training=False).data
    w = model.params["enc2.shortcut.weight"].data
    b = model.params["enc2.shortcut.bias"].data
    shortcut = np.einsum("nihw,oi->nohw", x, w[:, :, 0, 0]) + b[None, :, None, None]
    assert np.allclose(got2, np.maximum(shortcut, 0.0), atol=1e-12)


def test_attention_gate_masks_skip():
    model = AttentionUNet(_tiny(), seed=3, dtype=np.float64)
    rng = np.random.default_rng(3)
    skip = rng.normal(size=(1, 2, 8, 8))
    gate = rng.normal(size=(1, 4, 4, 4))
    out = model._gate("dec1.att", Tensor(skip), Tensor(gate)).data
    assert out.shape == skip.shape
    ratio = out / skip
    assert np.all(ratio > 0.0) and np.all(ratio < 1.0)
    # mask is shared across skip channels: per-pixel ratio matches between channels
    assert np.allclose(ratio[0, 0], ratio[0, 1])


def test_every_parameter_receives_gradient():
    model = AttentionUNet(_tiny(), seed=4, dtype=np.float64)
    x = Tensor(np.random.default_rng(4).normal(size=(2, 2, 16, 16)))
    target = Tensor(np.random.default_rng(5).normal(size=(2, 1, 16, 16)))
    loss = mse_loss(model.forward(x, training=True), target)
    loss.backward()
    missing = [n for n, p in model.params.items() if p.grad is None]
    assert missing == []
    zero_grads(model.params)
    assert all(p.grad is None for p in model.params.values())


def test_state_round_trip_and_validation():
    src = AttentionUNet(_tiny(), seed=5)
    dst = AttentionUNet(_tiny(), seed=6)
    x = np.random.default_rng(6).normal(size=(1, 2, 16, 16)).astype(np.float32)
    assert not np.allclose(src.predict(x), dst.predict(x))
    dst.load_state(src.state_tensors())
    assert np.array_equal(src.predict(x), dst.predict(x))

    incomplete = dict(src.state_tensors())
    incomplete.pop("head.weight")
    with pytest.raises(ValueError):
        dst.load_state(incomplete)
    extra = dict(src.state_tensors())
    extra["bogus"] = np.zeros(1)
    with pytest.raises(ValueError):
        dst.load_state(extra)
    wrong_shape = dict(src.state_tensors())
    wrong_shape["head.weight"] = np.zeros((2, 2, 1, 1), dtype=np.float32)
    with pytest.raises(ValueError):
        dst.load_state(wrong_shape)
