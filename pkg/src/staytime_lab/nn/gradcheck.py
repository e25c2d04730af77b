"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from staytime_lab.nn.params import ParamSet


@dataclass
class GradCheckResult:
    max_rel_error: float
    worst_param: str
    worst_index: int
    n_coordinates: int

    def __str__(self):
        return (
            f"max rel error {self.max_rel_error:.3e} at {self.worst_param}"
            f"[{self.worst_index}] over {self.n_coordinates} coordinates"
        )


def grad_check(loss_and_grad: Callable[[], float], params: ParamSet,
               eps: float = 1e-5, include: Sequence[str] | None = None) -> GradCheckResult:
    """Compare analytic gradients against (f(x+eps) - f(x-eps)) / (2 eps).

    ``loss_and_grad`` must zero the gradients itself, run a full forward and
    backward pass, populate ``Param.grad`` and return the scalar loss. Relative
    error uses a unit floor in the denominator so near-zero gradients do not
    inflate the report: ``|fd - an| / max(1, |fd|, |an|)``.
    """
    loss_and_grad()
    analytic = {p.name: p.grad.copy() for p in params}

    selected = [p for p in params if include is None or p.name in include]
    worst = (0.0, "", -1)
    n = 0
    for p in selected:
        flat = p.value.ravel()
        an_flat = analytic[p.name].ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = loss_and_grad()
            flat[i] = orig - eps
            f_minus = loss_and_grad()
            flat[i] = orig
            fd = (f_plus - f_minus) / (2.0 * eps)
            rel = abs(fd - an_flat[i]) / max(1.0, abs(fd), abs(an_flat[i]))
            if rel > worst[0]:
                worst = (rel, p.name, i)
            n += 1
    # restore a consistent gradient state for the verified point
    loss_and_grad()
    return GradCheckResult(worst[0], worst[1], worst[2], n)


def grad_check_inputs(loss_and_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
                      x: np.ndarray, eps: float = 1e-5) -> GradCheckResult:
    """Finite-difference check of a gradient with respect to an input array.

    ``loss_and_grad(x)`` returns ``(loss, dloss/dx)``.
    """
    _, analytic = loss_and_grad(x)
    x = x.copy()
    flat = x.ravel()
    an_flat = analytic.ravel()
    worst = (0.0, "input", -1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        f_plus, _ = loss_and_grad(x)
        flat[i] = orig - eps
        f_minus, _ = loss_and_grad(x)
        flat[i] = orig
        fd = (f_plus - f_minus) / (2.0 * eps)
        rel = abs(fd - an_flat[i]) / max(1.0, abs(fd), abs(an_flat[i]))
        if rel > worst[0]:
            worst = (rel, "input", i)
    return GradCheckResult(worst[0], worst[1], worst[2], flat.size)
