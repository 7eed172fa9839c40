"""Attention-gated residual U-Net for B-scan restoration.

Four residual blocks per side with 2x max pooling between encoder levels;
each decoder step nearest-upsamples, halves channels with a 3x3 conv, gates
the matching skip with a learned attention mask, concatenates, and applies
another residual block.  A final 1x1 conv maps back to one channel.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


@dataclass(frozen=True)
class ModelConfig:
    base_channels: int = 16
    levels: int = 4
    in_channels: int = 2

    def __post_init__(self) -> None:
        if self.base_channels < 2 or self.base_channels % 2 != 0:
            raise ValueError(f"base_channels must be an even integer >= 2, got {self.base_channels}")
        if self.levels < 1:
            raise ValueError(f"levels must be >= 1, got {self.levels}")
        if self.in_channels < 1:
            raise ValueError(f"in_channels must be >= 1, got {self.in_channels}")

    def check_patch_extents(self, height: int, width: int) -> None:
        div = 2**self.levels
        if height % div != 0 or width % div != 0 or height < div or width < div:
            raise ValueError(
                f"patch extents {height}x{width} must be positive multiples of 2^levels = {div}")

    def encoder_channels(self) -> list[int]:
        return [self.base_channels * 2**i for i in range(self.levels)]


class AttentionUNet:
    """Holds named parameter tensors and runs the forward graph."""

    def __init__(self, cfg: ModelConfig, seed: int = 0, dtype=np.float32):
        self.cfg = cfg
        self.dtype = np.dtype(dtype)
        self.params: dict[str, Tensor] = {}
        self.buffers: dict[str, Tensor] = {}
        rng = np.random.default_rng(seed)
        enc = cfg.encoder_channels()

        prev = cfg.in_channels
        for i, ch in enumerate(enc, start=1):
            self._init_block(f"enc{i}", prev, ch, rng)
            prev = ch
        bottom = enc[-1] * 2
        self._init_block("mid", enc[-1], bottom, rng)
        up_in = bottom
        for i in range(cfg.levels, 0, -1):
            skip = enc[i - 1]
            self._init_conv(f"dec{i}.up", up_in, skip, 3, rng)
            self._init_gate(f"dec{i}.att", skip, up_in, rng)
            self._init_block(f"dec{i}.block", 2 * skip, skip, rng)
            up_in = skip
        self._init_conv("head", enc[0], 1, 1, rng)

    # -- parameter construction ------------------------------------------

    def _new_param(self, name: str, arr: np.ndarray) -> None:
        self.params[name] = Tensor(arr.astype(self.dtype), requires_grad=True)

    def _init_conv(self, name: str, cin: int, cout: int, k: int, rng, bias: bool = True) -> None:
        std = np.sqrt(2.0 / (cin * k * k))
        self._new_param(f"{name}.weight", rng.normal(0.0, std, (cout, cin, k, k)))
        if bias:
            self._new_param(f"{name}.bias", np.zeros(cout))

    def _init_bn(self, name: str, ch: int) -> None:
        self._new_param(f"{name}.gamma", np.ones(ch))
        self._new_param(f"{name}.beta", np.zeros(ch))
        self.buffers[f"{name}.running_mean"] = Tensor(np.zeros(ch, dtype=self.dtype))
        self.buffers[f"{name}.running_var"] = Tensor(np.ones(ch, dtype=self.dtype))

    def _init_block(self, name: str, cin: int, cout: int, rng) -> None:
        self._init_conv(f"{name}.conv1", cin, cout, 3, rng)
        self._init_bn(f"{name}.bn1", cout)
        self._init_conv(f"{name}.conv2", cout, cout, 3, rng)
        self._init_bn(f"{name}.bn2", cout)
        if cin != cout:
            self._init_conv(f"{name}.shortcut", cin, cout, 1, rng)

    def _init_gate(self, name: str, skip_ch: int, gate_ch: int, rng) -> None:
        inter = skip_ch // 2
        self._init_conv(f"{name}.wx", skip_ch, inter, 1, rng, bias=False)
        self._init_conv(f"{name}.wg", gate_ch, inter, 1, rng)
        self._init_conv(f"{name}.psi", inter, 1, 1, rng)

    # -- forward -----------------------------------------------------------

    def _block(self, name: str, x: Tensor, training: bool) -> Tensor:
        p = self.params
        b = self.buffers
        y = ad.conv2d(x, p[f"{name}.conv1.weight"], p[f"{name}.conv1.bias"], padding=1)
        y = ad.batch_norm(y, p[f"{name}.bn1.gamma"], p[f"{name}.bn1.beta"],
                          b[f"{name}.bn1.running_mean"], b[f"{name}.bn1.running_var"],
                          training, BN_MOMENTUM, BN_EPS)
        y = ad.relu(y)
        y = ad.conv2d(y, p[f"{name}.conv2.weight"], p[f"{name}.conv2.bias"], padding=1)
        y = ad.batch_norm(y, p[f"{name}.bn2.gamma"], p[f"{name}.bn2.beta"],
                          b[f"{name}.bn2.running_mean"], b[f"{name}.bn2.running_var"],
                          training, BN_MOMENTUM, BN_EPS)
        if f"{name}.shortcut.weight" in p:
            s = ad.conv2d(x, p[f"{name}.shortcut.weight"], p[f"{name}.shortcut.bias"])
        else:
            s = x
        return ad.relu(ad.add(y, s))

    def _gate(self, name: str, skip: Tensor, gate: Tensor) -> Tensor:
        p = self.params
        q = ad.add(ad.conv2d(skip, p[f"{name}.wx.weight"], stride=2),
                   ad.conv2d(gate, p[f"{name}.wg.weight"], p[f"{name}.wg.bias"]))
        q = ad.relu(q)
        alpha = ad.sigmoid(ad.conv2d(q, p[f"{name}.psi.weight"], p[f"{name}.psi.bias"]))
        return ad.mul(skip, ad.upsample_nearest(alpha, 2))

    def forward(self, x: Tensor, training: bool = False) -> Tensor:
        """Map a batch x 2 x H x W patch batch to batch x 1 x H x W output."""
        if x.data.ndim != 4 or x.data.shape[1] != self.cfg.in_channels:
            raise ValueError(f"expected batch x {self.cfg.in_channels} x H x W input, got {x.data.shape}")
        self.cfg.check_patch_extents(x.data.shape[2], x.data.shape[3])
        skips = []
        h = x
        for i in range(1, self.cfg.levels + 1):
            h = self._block(f"enc{i}", h, training)
            skips.append(h)
            h = ad.max_pool2d(h, 2, 2)
        h = self._block("mid", h, training)
        for i in range(self.cfg.levels, 0, -1):
            up = ad.conv2d(ad.upsample_nearest(h, 2),
                           self.params[f"dec{i}.up.weight"], self.params[f"dec{i}.up.bias"],
                           padding=1)
            gated = self._gate(f"dec{i}.att", skips[i - 1], h)
            h = self._block(f"dec{i}.block", ad.concat_channels(gated, up), training)
        return ad.conv2d(h, self.params["head.weight"], self.params["head.bias"])

    def predict(self, batch: np.ndarray) -> np.ndarray:
        """Eval-mode forward on a raw array, returning a raw array."""
        with ad.no_grad():
            out = self.forward(Tensor(np.asarray(batch, dtype=self.dtype)), training=False)
        return out.data

    # -- bookkeeping ---------------------------------------------------------

    def param_count(self) -> int:
        return sum(int(p.data.size) for p in self.params.values())

    def state_tensors(self) -> dict[str, np.ndarray]:
        """Trainable parameters plus normalization buffers, by name."""
        out = {k: v.data for k, v in self.params.items()}
        out.update({k: v.data for k, v in self.buffers.items()})
        return out

    def load_state(self, tensors: dict[str, np.ndarray]) -> None:
        expected = set(self.params) | set(self.buffers)
        given = set(tensors)
        if expected != given:
            missing = sorted(expected - given)
            extra = sorted(given - expected)
            raise ValueError(f"state name mismatch: missing {missing}, unexpected {extra}")
        for name, arr in tensors.items():
            slot = self.params.get(name) or self.buffers.get(name)
            if tuple(slot.data.shape) != tuple(arr.shape):
                raise ValueError(f"shape mismatch for {name}: {arr.shape} vs {slot.data.shape}")
            slot.data = np.asarray(arr, dtype=self.dtype)
