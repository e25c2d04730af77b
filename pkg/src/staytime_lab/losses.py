"""Training objectives: list-wise ranking, masked BCE, and the weighted total.

All functions are pure and return (scalar loss, analytic gradient). Masked
slots always receive exactly zero gradient.
"""

from __future__ import annotations

import numpy as np

from staytime_lab.errors import MaskError, ShapeError


def log_sigmoid(z: np.ndarray) -> np.ndarray:
    # stable: log sigma(z) = -softplus(-z)
    return -np.logaddexp(0.0, -z)


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def listmle_loss(scores: np.ndarray, true_order: np.ndarray,
                 mask: np.ndarray) -> tuple[float, np.ndarray]:
    """Plackett-Luce negative log-likelihood of the true permutation.

    ``true_order`` lists the slot indices of the unmasked slots from best to
    worst; ``loss = sum_i [logsumexp(s[order[i:]]) - s[order[i]]]``. Masked
    slots must not appear in ``true_order`` and get zero gradient.
    """
    scores = np.asarray(scores, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    true_order = np.asarray(true_order, dtype=np.int64)
    if scores.shape != mask.shape or scores.ndim != 1:
        raise ShapeError(f"scores {scores.shape} and mask {mask.shape} must be equal 1-D")
    n_real = int(mask.sum())
    if n_real == 0:
        raise MaskError("ListMLE needs at least one unmasked slot")
    if sorted(true_order.tolist()) != sorted(np.flatnonzero(mask).tolist()):
        raise ValueError("true_order must cover exactly the unmasked slots")

    s = scores[true_order]  # best-to-worst
    m = len(s)
    # suffix logsumexp, computed backwards for stability
    suffix = np.empty(m)
    running = -np.inf
    for i in range(m - 1, -1, -1):
        running = np.logaddexp(running, s[i])
        suffix[i] = running
    loss = float(np.sum(suffix - s))

    # d loss / d s[i] = sum_{j <= i} softmax_j(i) - 1, softmax over suffix j
    grad_ordered = np.zeros(m)
    for j in range(m):
        w = np.exp(s[j:] - suffix[j])
        grad_ordered[j:] += w
    grad_ordered -= 1.0

    grad = np.zeros_like(scores)
    grad[true_order] = grad_ordered
    return loss, grad


def listmle_loss_batch(scores: np.ndarray, orders: np.ndarray,
                       mask: np.ndarray) -> tuple[float, np.ndarray]:
    """Batched ListMLE, mean over examples that have at least one real slot.

    ``orders`` is (batch, k) with -1 padding after the real slots; rows with no
    real slot contribute nothing.
    """
    scores = np.asarray(scores, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    B, k = scores.shape
    counts = mask.sum(axis=1)
    rows = np.flatnonzero(counts > 0)
    if rows.size == 0:
        raise MaskError("ListMLE batch has no example with unmasked slots")

    safe_orders = np.where(orders >= 0, orders, 0)
    valid = orders >= 0
    s_ord = np.take_along_axis(scores, safe_orders, axis=1)
    s_inf = np.where(valid, s_ord, -np.inf)

    # suffix logsumexp per row
    suffix = np.full((B, k), -np.inf)
    running = np.full(B, -np.inf)
    for i in range(k - 1, -1, -1):
        running = np.logaddexp(running, s_inf[:, i])
        suffix[:, i] = running
    per_slot = np.where(valid, suffix - s_inf, 0.0)
    loss = float(per_slot[rows].sum() / rows.size)

    # grad wrt ordered scores: sum over prefixes of suffix-softmax weights
    s_safe = np.where(valid, s_ord, 0.0)
    suffix_safe = np.where(valid, suffix, 0.0)
    diff = s_safe[:, None, :] - suffix_safe[:, :, None]  # (B, j, i)
    tri = np.arange(k)[None, :, None] <= np.arange(k)[None, None, :]
    ok = valid[:, None, :] & valid[:, :, None] & tri
    w = np.exp(np.where(ok, diff, -np.inf))
    grad_ord = w.sum(axis=1) - valid.astype(np.float64)
    grad_ord /= rows.size

    grad = np.zeros_like(scores)
    np.put_along_axis(grad, safe_orders, np.where(valid, grad_ord, 0.0), axis=1)
    return loss, grad


def bce_loss(logits: np.ndarray, labels: np.ndarray,
             mask: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy over unmasked slots, in stable logit form.

    Accepts any shape; the mean runs over all unmasked entries. Gradient is
    ``(sigma(z) - y) / N`` on unmasked slots, zero elsewhere.
    """
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if z.shape != y.shape or z.shape != mask.shape:
        raise ShapeError(f"logits {z.shape}, labels {y.shape}, mask {mask.shape} differ")
    n = int(mask.sum())
    if n == 0:
        raise MaskError("BCE needs at least one unmasked slot")
    # max(z,0) - z*y + log(1 + exp(-|z|))
    per = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    loss = float(per[mask].sum() / n)
    grad = np.where(mask, (sigmoid(z) - y) / n, 0.0)
    return loss, grad


def total_loss(staytime_loss: float, l_r1: float, l_r2: float,
               lambda1: float, lambda2: float) -> float:
    """Weighted sum ``L_staytime + lambda1 * L_R1 + lambda2 * L_R2``."""
    for name, v in (("staytime_loss", staytime_loss), ("l_r1", l_r1), ("l_r2", l_r2)):
        if not np.isfinite(v):
            raise ValueError(f"non-finite loss component {name}={v}")
    if lambda1 < 0 or lambda2 < 0:
        raise ValueError("loss weights must be non-negative")
    return float(staytime_loss + lambda1 * l_r1 + lambda2 * l_r2)
