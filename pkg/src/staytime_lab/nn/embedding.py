"""Trainable embedding lookup with scatter-add gradients."""

from __future__ import annotations

import numpy as np

from staytime_lab.nn.params import ParamSet


class EmbeddingLayer:
    """Row gather from a trainable (n_rows, dim) table."""

    def __init__(self, params: ParamSet, name: str, n_rows: int, dim: int,
                 rng: np.random.Generator, scale: float = 0.05):
        self.n_rows = n_rows
        self.dim = dim
        self.table = params.register(
            f"{name}/table", rng.normal(0.0, scale, size=(n_rows, dim))
        )
        self._ids = None

    def forward(self, ids: np.ndarray) -> np.ndarray:
        ids = np.asarray(ids)
        if ids.size and (ids.min() < 0 or ids.max() >= self.n_rows):
            bad = ids[(ids < 0) | (ids >= self.n_rows)][0]
            raise IndexError(
                f"embedding id {int(bad)} out of range [0, {self.n_rows}) "
                f"for table {self.table.name!r}"
            )
        self._ids = ids
        return self.table.value[ids]

    def backward(self, grad_out: np.ndarray) -> None:
        if self._ids is None:
            raise RuntimeError("backward called before forward")
        # duplicate ids accumulate
        np.add.at(self.table.grad, self._ids, grad_out)
