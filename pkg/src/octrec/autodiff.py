"""Minimal reverse-mode automatic differentiation over numpy arrays.

Tensors record the ops that produced them; ``backward`` on a scalar loss
walks the graph in reverse topological order and accumulates gradients into
every tensor that requires them.  The op set is exactly what an
encoder/decoder convolutional network with attention gates needs: conv,
batch norm, relu, sigmoid, max pool, nearest upsampling, concat, add, mul,
and a mean-squared-error loss.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class Tensor:
    """Array node in the autodiff graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_spent")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None
        self._spent = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def _needs_grad(self) -> bool:
        return self.requires_grad or bool(self._parents)

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = g.copy() if isinstance(g, np.ndarray) else np.asarray(g)
        else:
            self.grad = self.grad + g

    def backward(self) -> None:
        """Propagate gradients from this scalar to every contributing tensor."""
        if self.data.size != 1:
            raise ValueError(f"backward requires a scalar, got shape {self.data.shape}")
        if self._spent:
            raise RuntimeError("graph already consumed by backward; rebuild the forward pass first")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward()
        # Backward closures reference their own output node, so every graph
        # is a reference cycle the allocator cannot reclaim by refcount alone.
        # The graph is single-use (see _spent), so release it here: without
        # this, long training loops accumulate whole step graphs until the
        # cyclic collector runs and can exhaust memory first.
        for node in topo:
            node._parents = ()
            node._backward = None
            if node is not self and not node.requires_grad:
                node.grad = None
        self._spent = True

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


_grad_enabled = True


class no_grad:
    """Context manager that keeps ops from recording the autodiff graph.

    Inference and validation passes run under it so they allocate nothing
    beyond the forward activations.
    """

    def __enter__(self) -> None:
        global _grad_enabled
        self._previous = _grad_enabled
        _grad_enabled = False

    def __exit__(self, *exc) -> bool:
        global _grad_enabled
        _grad_enabled = self._previous
        return False


def _result(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p._needs_grad() for p in parents):
        out._parents = parents
        out._backward = backward
    return out


def zero_grads(params) -> None:
    """Clear gradients on an iterable (or dict) of tensors."""
    values = params.values() if isinstance(params, dict) else params
    for p in values:
        p.grad = None


# --- Elementwise and structural ops ------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ValueError(f"add shape mismatch: {a.data.shape} vs {b.data.shape}")
    out_data = a.data + b.data

    def backward():
        g = out.grad
        if a._needs_grad():
            a._accumulate(g)
        if b._needs_grad():
            b._accumulate(g)

    out = _result(out_data, (a, b), backward)
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product.  Shapes must match, except that one operand may
    have a single channel against the other's many (attention masks)."""
    sa, sb = a.data.shape, b.data.shape
    if sa != sb:
        broadcast_ok = (
            len(sa) == 4
            and len(sb) == 4
            and sa[0] == sb[0]
            and sa[2:] == sb[2:]
            and (sa[1] == 1 or sb[1] == 1)
        )
        if not broadcast_ok:
            raise ValueError(f"mul shape mismatch: {sa} vs {sb}")
    out_data = a.data * b.data

    def backward():
        g = out.grad
        if a._needs_grad():
            ga = g * b.data
            if a.data.shape != ga.shape:
                ga = ga.sum(axis=1, keepdims=True)
            a._accumulate(ga)
        if b._needs_grad():
            gb = g * a.data
            if b.data.shape != gb.shape:
                gb = gb.sum(axis=1, keepdims=True)
            b._accumulate(gb)

    out = _result(out_data, (a, b), backward)
    return out


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def backward():
        if x._needs_grad():
            x._accumulate(out.grad * mask)

    out = _result(np.where(mask, x.data, 0), (x,), backward)
    return out


def sigmoid(x: Tensor) -> Tensor:
    d = x.data
    s = np.empty_like(d)
    pos = d >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    ez = np.exp(d[~pos])
    s[~pos] = ez / (1.0 + ez)

    def backward():
        if x._needs_grad():
            x._accumulate(out.grad * s * (1.0 - s))

    out = _result(s, (x,), backward)
    return out


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    sa, sb = a.data.shape, b.data.shape
    if len(sa) != 4 or len(sb) != 4 or sa[0] != sb[0] or sa[2:] != sb[2:]:
        raise ValueError(f"concat needs matching batch/spatial extents: {sa} vs {sb}")
    ca = sa[1]

    def backward():
        g = out.grad
        if a._needs_grad():
            a._accumulate(g[:, :ca])
        if b._needs_grad():
            b._accumulate(g[:, ca:])

    out = _result(np.concatenate([a.data, b.data], axis=1), (a, b), backward)
    return out


# --- Convolution and friends --------------------------------------------------


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None,
           stride: int = 1, padding: int = 0) -> Tensor:
    """2-D cross-correlation over batch x channels x height x width."""
    xd, wd = x.data, weight.data
    if xd.ndim != 4:
        raise ValueError(f"conv2d input must be 4-D, got {xd.shape}")
    if wd.ndim != 4:
        raise ValueError(f"conv2d weight must be 4-D, got {wd.shape}")
    n, cin, h, w = xd.shape
    cout, cin_w, kh, kw = wd.shape
    if cin != cin_w:
        raise ValueError(f"input has {cin} channels but weight expects {cin_w}")
    if stride < 1 or padding < 0:
        raise ValueError("stride must be >= 1 and padding >= 0")
    if bias is not None and bias.data.shape != (cout,):
        raise ValueError(f"bias must have shape ({cout},), got {bias.data.shape}")
    hp, wp = h + 2 * padding, w + 2 * padding
    if hp < kh or wp < kw:
        raise ValueError(f"kernel {kh}x{kw} larger than padded input {hp}x{wp}")

    xp = np.pad(xd, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else xd
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    ho, wo = win.shape[2], win.shape[3]
    cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(n * ho * wo, cin * kh * kw)
    w_mat = wd.reshape(cout, cin * kh * kw)
    out_data = (cols @ w_mat.T).reshape(n, ho, wo, cout).transpose(0, 3, 1, 2)
    if bias is not None:
        out_data = out_data + bias.data[None, :, None, None]

    def backward():
        g = out.grad
        g_mat = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(n * ho * wo, cout)
        if weight._needs_grad():
            weight._accumulate((g_mat.T @ cols).reshape(wd.shape))
        if bias is not None and bias._needs_grad():
            bias._accumulate(g.sum(axis=(0, 2, 3)))
        if x._needs_grad():
            dcols = (g_mat @ w_mat).reshape(n, ho, wo, cin, kh, kw).transpose(0, 3, 1, 2, 4, 5)
            dxp = np.zeros((n, cin, hp, wp), dtype=g.dtype)
            for i in range(kh):
                for j in range(kw):
                    dxp[:, :, i: i + stride * (ho - 1) + 1: stride,
                        j: j + stride * (wo - 1) + 1: stride] += dcols[:, :, :, :, i, j]
            if padding:
                dxp = dxp[:, :, padding:-padding, padding:-padding]
            x._accumulate(dxp)

    parents = (x, weight) if bias is None else (x, weight, bias)
    out = _result(out_data, parents, backward)
    return out


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor,
               running_mean: Tensor, running_var: Tensor,
               training: bool, momentum: float = 0.1, eps: float = 1e-5) -> Tensor:
    """Per-channel normalization with affine scale/shift.

    Training mode normalizes with batch statistics (population variance) and
    updates the running buffers in place; eval mode uses the buffers and
    treats them as constants in the backward pass.
    """
    xd = x.data
    if xd.ndim != 4:
        raise ValueError(f"batch_norm input must be 4-D, got {xd.shape}")
    c = xd.shape[1]
    for name, t in (("gamma", gamma), ("beta", beta),
                    ("running_mean", running_mean), ("running_var", running_var)):
        if t.data.shape != (c,):
            raise ValueError(f"{name} must have shape ({c},), got {t.data.shape}")
    axes = (0, 2, 3)
    if training:
        mean = xd.mean(axis=axes)
        var = ((xd - mean[None, :, None, None]) ** 2).mean(axis=axes)
        running_mean.data = (1.0 - momentum) * running_mean.data + momentum * mean
        running_var.data = (1.0 - momentum) * running_var.data + momentum * var
    else:
        mean = running_mean.data
        var = running_var.data
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (xd - mean[None, :, None, None]) * inv_std[None, :, None, None]
    out_data = gamma.data[None, :, None, None] * xhat + beta.data[None, :, None, None]
    m = xd.shape[0] * xd.shape[2] * xd.shape[3]

    def backward():
        g = out.grad
        if gamma._needs_grad():
            gamma._accumulate((g * xhat).sum(axis=axes))
        if beta._needs_grad():
            beta._accumulate(g.sum(axis=axes))
        if x._needs_grad():
            gi = g * gamma.data[None, :, None, None]
            if training:
                s1 = gi.sum(axis=axes)[None, :, None, None]
                s2 = (gi * xhat).sum(axis=axes)[None, :, None, None]
                dx = (inv_std[None, :, None, None] / m) * (m * gi - s1 - xhat * s2)
            else:
                dx = gi * inv_std[None, :, None, None]
            x._accumulate(dx)

    out = _result(out_data, (x, gamma, beta), backward)
    return out


def max_pool2d(x: Tensor, window: int = 2, stride: int | None = None) -> Tensor:
    """Max over non-overlapping (by default) square windows; ties go to the
    first element in row-major window order."""
    xd = x.data
    if xd.ndim != 4:
        raise ValueError(f"max_pool2d input must be 4-D, got {xd.shape}")
    if window < 1:
        raise ValueError("window must be >= 1")
    stride = window if stride is None else stride
    if stride < 1:
        raise ValueError("stride must be >= 1")
    n, c, h, w = xd.shape
    if (h - window) % stride != 0 or (w - window) % stride != 0 or h < window or w < window:
        raise ValueError(f"extents {h}x{w} not coverable by window {window} stride {stride}")
    win = sliding_window_view(xd, (window, window), axis=(2, 3))[:, :, ::stride, ::stride]
    ho, wo = win.shape[2], win.shape[3]
    flat = win.reshape(n, c, ho, wo, window * window)
    idx = flat.argmax(axis=-1)
    out_data = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]

    def backward():
        if not x._needs_grad():
            return
        g = out.grad
        dx = np.zeros_like(xd)
        nn, cc, hh, ww = np.indices((n, c, ho, wo), sparse=False)
        rows = hh * stride + idx // window
        cols_ = ww * stride + idx % window
        if stride >= window:
            dx[nn, cc, rows, cols_] = g
        else:
            np.add.at(dx, (nn, cc, rows, cols_), g)
        x._accumulate(dx)

    out = _result(np.ascontiguousarray(out_data), (x,), backward)
    return out


def upsample_nearest(x: Tensor, factor: int = 2) -> Tensor:
    xd = x.data
    if xd.ndim != 4:
        raise ValueError(f"upsample input must be 4-D, got {xd.shape}")
    if factor < 1:
        raise ValueError("factor must be >= 1")
    out_data = xd.repeat(factor, axis=2).repeat(factor, axis=3)
    n, c, h, w = xd.shape

    def backward():
        if x._needs_grad():
            g = out.grad.reshape(n, c, h, factor, w, factor).sum(axis=(3, 5))
            x._accumulate(g)

    out = _result(out_data, (x,), backward)
    return out


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    if pred.data.shape != target.data.shape:
        raise ValueError(f"mse shapes differ: {pred.data.shape} vs {target.data.shape}")
    diff = pred.data - target.data
    n = diff.size
    out_data = np.asarray((diff * diff).sum() / n, dtype=pred.data.dtype)

    def backward():
        g = out.grad
        scale = 2.0 / n
        if pred._needs_grad():
            pred._accumulate(g * scale * diff)
        if target._needs_grad():
            target._accumulate(-g * scale * diff)

    out = _result(out_data, (pred, target), backward)
    return out
