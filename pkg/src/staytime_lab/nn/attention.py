"""Multi-head self-attention over a short token sequence, with key masking.

Masked tokens are removed from the attention targets by forcing their logits
to -inf before the softmax; their value rows therefore receive gradient only
through their own query row, which downstream code discards for padded slots.
"""

from __future__ import annotations

import numpy as np

from staytime_lab.errors import MaskError, ShapeError
from staytime_lab.nn.params import ParamSet
from staytime_lab.nn.layers import xavier_uniform


def _softmax_last(logits: np.ndarray) -> np.ndarray:
    m = np.max(logits, axis=-1, keepdims=True)
    e = np.exp(logits - m)
    return e / e.sum(axis=-1, keepdims=True)


class MultiHeadSelfAttention:
    """Scaled dot-product self-attention, ``model_dim`` split across heads."""

    def __init__(self, params: ParamSet, name: str, model_dim: int, n_heads: int,
                 rng: np.random.Generator):
        if model_dim % n_heads != 0:
            raise ShapeError(
                f"model_dim {model_dim} not divisible by n_heads {n_heads}"
            )
        self.model_dim = model_dim
        self.n_heads = n_heads
        self.head_dim = model_dim // n_heads
        d = model_dim
        self.Wq = params.register(f"{name}/Wq", xavier_uniform(rng, d, d))
        self.Wk = params.register(f"{name}/Wk", xavier_uniform(rng, d, d))
        self.Wv = params.register(f"{name}/Wv", xavier_uniform(rng, d, d))
        self.Wo = params.register(f"{name}/Wo", xavier_uniform(rng, d, d))
        self.bq = params.register(f"{name}/bq", np.zeros((1, d)))
        self.bk = params.register(f"{name}/bk", np.zeros((1, d)))
        self.bv = params.register(f"{name}/bv", np.zeros((1, d)))
        self.bo = params.register(f"{name}/bo", np.zeros((1, d)))
        self._cache = None

    def forward(self, x: np.ndarray, mask: np.ndarray) -> np.ndarray:
        """x: (batch, tokens, model_dim); mask: (batch, tokens) bool, True = real."""
        if x.ndim != 3 or x.shape[2] != self.model_dim:
            raise ShapeError(f"expected (batch, tokens, {self.model_dim}), got {x.shape}")
        if mask.shape != x.shape[:2]:
            raise ShapeError(f"mask shape {mask.shape} does not match tokens {x.shape[:2]}")
        if not mask.any(axis=1).all():
            raise MaskError("at least one token per example must be unmasked")

        B, T, d = x.shape
        H, dh = self.n_heads, self.head_dim
        flat = x.reshape(B * T, d)
        q = (flat @ self.Wq.value + self.bq.value).reshape(B, T, H, dh)
        k = (flat @ self.Wk.value + self.bk.value).reshape(B, T, H, dh)
        v = (flat @ self.Wv.value + self.bv.value).reshape(B, T, H, dh)

        logits = np.einsum("bihd,bjhd->bhij", q, k) / np.sqrt(dh)
        logits = np.where(mask[:, None, None, :], logits, -np.inf)
        attn = _softmax_last(logits)  # (B, H, T, T), rows sum to 1 over unmasked keys

        ctx = np.einsum("bhij,bjhd->bihd", attn, v).reshape(B * T, d)
        out = (ctx @ self.Wo.value + self.bo.value).reshape(B, T, d)
        self._cache = (x, q, k, v, attn, ctx, mask)
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        x, q, k, v, attn, ctx, mask = self._cache
        B, T, d = x.shape
        H, dh = self.n_heads, self.head_dim

        g_flat = grad_out.reshape(B * T, d)
        self.Wo.grad += ctx.T @ g_flat
        self.bo.grad += g_flat.sum(axis=0, keepdims=True)
        d_ctx = (g_flat @ self.Wo.value.T).reshape(B, T, H, dh)

        d_attn = np.einsum("bihd,bjhd->bhij", d_ctx, v)
        d_v = np.einsum("bhij,bihd->bjhd", attn, d_ctx)

        # softmax backward; attn is exactly 0 on masked keys, so they get 0
        inner = (d_attn * attn).sum(axis=-1, keepdims=True)
        d_logits = attn * (d_attn - inner) / np.sqrt(dh)

        d_q = np.einsum("bhij,bjhd->bihd", d_logits, k)
        d_k = np.einsum("bhij,bihd->bjhd", d_logits, q)

        x_flat = x.reshape(B * T, d)
        dx = np.zeros_like(x_flat)
        for W, b, grad in ((self.Wq, self.bq, d_q), (self.Wk, self.bk, d_k),
                           (self.Wv, self.bv, d_v)):
            g2 = grad.reshape(B * T, d)
            W.grad += x_flat.T @ g2
            b.grad += g2.sum(axis=0, keepdims=True)
            dx += g2 @ W.value.T
        return dx.reshape(B, T, d)

    def last_attention(self) -> np.ndarray:
        """Attention weights of the most recent forward call, (B, H, T, T)."""
        if self._cache is None:
            raise RuntimeError("no forward call has been made")
        return self._cache[4]
