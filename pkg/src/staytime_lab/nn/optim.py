"""SGD and Adam over a ParamSet.

Gradients are accumulated by the layers and zeroed by the training loop at
the start of each step; the optimizers only consume them.
"""

from __future__ import annotations

import numpy as np

from staytime_lab.nn.params import ParamSet


def _check_finite(params: ParamSet) -> None:
    for p in params:
        if not np.all(np.isfinite(p.grad)):
            raise FloatingPointError(f"non-finite gradient in parameter {p.name!r}")


class SGD:
    def __init__(self, params: ParamSet, lr: float):
        self.params = params
        self.lr = lr

    def step(self) -> None:
        _check_finite(self.params)
        for p in self.params:
            p.value -= self.lr * p.grad


class Adam:
    def __init__(self, params: ParamSet, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {p.name: np.zeros_like(p.value) for p in params}
        self._v = {p.name: np.zeros_like(p.value) for p in params}

    def step(self) -> None:
        _check_finite(self.params)
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p in self.params:
            m = self._m[p.name]
            v = self._v[p.name]
            m *= self.beta1
            m += (1.0 - self.beta1) * p.grad
            v *= self.beta2
            v += (1.0 - self.beta2) * p.grad * p.grad
            p.value -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
