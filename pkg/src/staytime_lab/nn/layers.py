"""Dense layers and the small MLP used throughout the model.

Forward passes are pure; backward passes accumulate into ``Param.grad`` and
return the gradient with respect to the layer input. Each layer caches the
activations of the most recent forward call, so the calling pattern is
strictly forward-then-backward per batch.
"""

from __future__ import annotations

import numpy as np

from staytime_lab.errors import ShapeError
from staytime_lab.nn.params import ParamSet


def xavier_uniform(rng: np.random.Generator, n_in: int, n_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-limit, limit, size=(n_in, n_out))


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


class Dense:
    """Affine map ``x @ W + b`` over the last axis of a (batch, n_in) input."""

    def __init__(self, params: ParamSet, name: str, n_in: int, n_out: int,
                 rng: np.random.Generator):
        self.n_in = n_in
        self.n_out = n_out
        self.W = params.register(f"{name}/W", xavier_uniform(rng, n_in, n_out))
        self.b = params.register(f"{name}/b", np.zeros((1, n_out)))
        self._x = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ShapeError(
                f"dense layer {self.W.name!r} expects (batch, {self.n_in}), got {x.shape}"
            )
        self._x = x
        return x @ self.W.value + self.b.value

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._x is None:
            raise RuntimeError("backward called before forward")
        if grad_out.shape != (self._x.shape[0], self.n_out):
            raise ShapeError(
                f"dense layer {self.W.name!r} got upstream gradient {grad_out.shape}, "
                f"expected {(self._x.shape[0], self.n_out)}"
            )
        self.W.grad += self._x.T @ grad_out
        self.b.grad += grad_out.sum(axis=0, keepdims=True)
        return grad_out @ self.W.value.T


class MLP:
    """Stack of dense layers with ReLU between them and a linear output.

    ``dims = [in, h1, ..., out]``; a three-layer MLP is ``dims`` of length 4.
    """

    def __init__(self, params: ParamSet, name: str, dims: list[int],
                 rng: np.random.Generator):
        if len(dims) < 2:
            raise ValueError("MLP needs at least an input and an output dim")
        self.dims = list(dims)
        self.layers = [
            Dense(params, f"{name}/fc{i}", dims[i], dims[i + 1], rng)
            for i in range(len(dims) - 1)
        ]
        self._relu_masks = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._relu_masks = []
        h = x
        for layer in self.layers[:-1]:
            z = layer.forward(h)
            self._relu_masks.append(z > 0.0)
            h = np.where(self._relu_masks[-1], z, 0.0)
        return self.layers[-1].forward(h)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        g = self.layers[-1].backward(grad_out)
        for layer, mask in zip(reversed(self.layers[:-1]), reversed(self._relu_masks)):
            g = layer.backward(np.where(mask, g, 0.0))
        return g

    def min_preactivation_margin(self, x: np.ndarray) -> float:
        """Smallest |pre-activation| over the hidden layers for input ``x``.

        Finite-difference checks are only meaningful away from ReLU kinks;
        fixtures assert this margin exceeds the probe step.
        """
        margin = np.inf
        h = x
        for layer in self.layers[:-1]:
            z = layer.forward(h)
            if z.size:
                margin = min(margin, float(np.abs(z).min()))
            h = relu(z)
        return margin
