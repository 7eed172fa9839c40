import numpy as np
import pytest

from octrec.autodiff import Tensor
from octrec.optim import Adam


def _param(value):
    t = Tensor(np.asarray(value, dtype=np.float64), requires_grad=True)
    return t


def test_first_step_with_unit_gradient():
    p = _param([0.5])
    opt = Adam({"w": p}, lr=1e-4)
    p.grad = np.array([1.0])
    opt.step()
    # bias correction makes the very first update lr / (1 + eps)
    assert p.data[0] == pytest.approx(0.5 - 1e-4 / (1.0 + 1e-8), abs=1e-15)
    assert opt.step_count == 1


def test_constant_gradient_moves_lr_per_step():
    p = _param([0.0])
    opt = Adam({"w": p}, lr=1e-3)
    for _ in range(5):
        p.grad = np.array([1.0])
        opt.step()
    assert p.data[0] == pytest.approx(-5 * 1e-3 / (1.0 + 1e-8), rel=1e-12)


def test_matches_reference_implementation():
    rng = np.random.default_rng(0)
    w0 = rng.normal(size=(3, 2))
    grads = [rng.normal(size=(3, 2)) for _ in range(5)]

    p = _param(w0)
    opt = Adam({"w": p}, lr=1e-2, beta1=0.9, beta2=0.999, eps=1e-8)
    for g in grads:
        p.grad = g.copy()
        opt.step()

    ref = w0.copy()
    m = np.zeros_like(ref)
    v = np.zeros_like(ref)
    for t, g in enumerate(grads, start=1):
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        ref -= 1e-2 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
    assert np.allclose(p.data, ref, rtol=0, atol=1e-15)


def test_missing_gradient_leaves_parameter_alone():
    p = _param([1.0])
    q = _param([2.0])
    opt = Adam({"p": p, "q": q}, lr=0.1)
    q.grad = np.array([1.0])
    opt.step()
    assert p.data[0] == 1.0
    assert q.data[0] != 2.0


def test_zero_grad_clears():
    p = _param([1.0])
    opt = Adam({"p": p})
    p.grad = np.array([1.0])
    opt.zero_grad()
    assert p.grad is None


def test_hyperparameter_validation():
    p = {"p": _param([0.0])}
    with pytest.raises(ValueError):
        Adam(p, lr=0.0)
    with pytest.raises(ValueError):
        Adam(p, beta1=1.0)
    with pytest.raises(ValueError):
        Adam(p, beta2=-0.1)
    with pytest.raises(ValueError):
        Adam(p, eps=0.0)


def test_load_moments_resume_matches_uninterrupted_run():
    rng = np.random.default_rng(1)
    w0 = rng.normal(size=4)
    grads = [rng.normal(size=4) for _ in range(6)]

    p_full = _param(w0)
    full = Adam({"w": p_full}, lr=1e-2)
    for g in grads:
        p_full.grad = g.copy()
        full.step()

    p_head = _param(w0)
    head = Adam({"w": p_head}, lr=1e-2)
    for g in grads[:3]:
        p_head.grad = g.copy()
        head.step()

    p_tail = _param(p_head.data.copy())
    tail = Adam({"w": p_tail}, lr=1e-2)
    tail.load_moments({"w": head.m["w"].copy()}, {"w": head.v["w"].copy()}, head.step_count)
    for g in grads[3:]:
        p_tail.grad = g.copy()
        tail.step()

    assert np.allclose(p_tail.data, p_full.data, rtol=0, atol=1e-15)


def test_load_moments_validation():
    p = _param(np.zeros(3))
    opt = Adam({"w": p})
    with pytest.raises(ValueError):
        opt.load_moments({}, {}, 1)
    with pytest.raises(ValueError):
        opt.load_moments({"w": np.zeros(2)}, {"w": np.zeros(3)}, 1)
