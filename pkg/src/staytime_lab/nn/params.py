"""Named parameter tensors with matching gradient buffers.

Every trainable array in the toolkit is a 2-D float64 ``Param`` registered in a
``ParamSet`` under a unique name. The flat namespace is what optimizers,
checkpoints and the gradient checker operate on. Parameter state is
single-writer; concurrent readers are safe once training stops mutating it.
"""

from __future__ import annotations

import numpy as np

from staytime_lab.errors import ShapeError


class Param:
    """One named 2-D tensor plus its gradient accumulator."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        value = np.asarray(value, dtype=np.float64)
        if value.ndim != 2:
            raise ShapeError(f"parameter {name!r} must be 2-D, got shape {value.shape}")
        if not np.all(np.isfinite(value)):
            raise ValueError(f"parameter {name!r} initialized with non-finite values")
        self.name = name
        self.value = value
        self.grad = np.zeros_like(value)

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Param({self.name!r}, shape={self.value.shape})"


class ParamSet:
    """Ordered collection of uniquely named parameters."""

    def __init__(self):
        self._params: dict[str, Param] = {}

    def register(self, name: str, value: np.ndarray) -> Param:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        param = Param(name, value)
        self._params[name] = param
        return param

    def __iter__(self):
        return iter(self._params.values())

    def __len__(self):
        return len(self._params)

    def __contains__(self, name: str):
        return name in self._params

    def __getitem__(self, name: str) -> Param:
        return self._params[name]

    def names(self) -> list[str]:
        return list(self._params)

    def zero_grads(self) -> None:
        for p in self._params.values():
            p.grad[...] = 0.0

    def n_coordinates(self) -> int:
        return sum(p.value.size for p in self._params.values())

    def snapshot(self) -> dict[str, np.ndarray]:
        """Copy of all current values, e.g. for best-epoch checkpoints."""
        return {name: p.value.copy() for name, p in self._params.items()}

    def restore(self, values: dict[str, np.ndarray]) -> None:
        for name, p in self._params.items():
            if name not in values:
                raise KeyError(f"snapshot is missing parameter {name!r}")
            if values[name].shape != p.value.shape:
                raise ShapeError(
                    f"snapshot shape {values[name].shape} != parameter shape "
                    f"{p.value.shape} for {name!r}"
                )
            p.value[...] = values[name]
