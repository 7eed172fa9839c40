"""Adam optimizer over named parameter tensors."""
from __future__ import annotations

import numpy as np

from .autodiff import Tensor


class Adam:
    """Adaptive-moment gradient descent with bias-corrected estimates."""

    def __init__(self, params: dict[str, Tensor], lr: float = 1e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0.0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        if not 0.0 <= beta1 < 1.0 or not 0.0 <= beta2 < 1.0:
            raise ValueError("betas must lie in [0, 1)")
        if eps <= 0.0:
            raise ValueError("eps must be positive")
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def step(self) -> None:
        """Apply one update from the gradients currently on the parameters."""
        self.step_count += 1
        c1 = 1.0 - self.beta1**self.step_count
        c2 = 1.0 - self.beta2**self.step_count
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data = p.data - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def load_moments(self, m: dict[str, np.ndarray], v: dict[str, np.ndarray],
                     step_count: int) -> None:
        """Restore optimizer state, e.g. when resuming from a checkpoint."""
        for name in self.params:
            if name not in m or name not in v:
                raise ValueError(f"missing optimizer moments for parameter {name!r}")
            if m[name].shape != self.params[name].data.shape:
                raise ValueError(f"moment shape mismatch for parameter {name!r}")
            self.m[name] = np.asarray(m[name], dtype=self.params[name].data.dtype)
            self.v[name] = np.asarray(v[name], dtype=self.params[name].data.dtype)
        self.step_count = int(step_count)
