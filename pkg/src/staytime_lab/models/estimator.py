"""The staytime estimator: a base predictor head over either plain feature
tokens or the embedding-fused representation with ranking auxiliary tasks.

``StaytimeModel`` follows the scikit-learn estimator protocol (constructor
params, ``fit``/``predict_*``, ``get_params``) so it composes with standard
tooling, while consuming ``ExampleBatch`` columns rather than a flat design
matrix.

With ``lcu=False`` the head input is the concatenation of the user and video
feature tokens. With ``lcu=True`` the tokens additionally include the
projected video embedding and one projected embedding per sampled comment;
the stack goes through multi-head self-attention, the head consumes
[user row, video-feature row, video-embedding row, masked mean of comment
rows], and two per-slot towers score the comments for the popularity-ranking
(ListMLE) and interaction-prediction (BCE) auxiliary losses, weighted by
``lambda1`` and ``lambda2``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from staytime_lab.errors import ConfigError, FitError, NotFittedError
from staytime_lab.features import USER_FEATURE_DIM, VIDEO_FEATURE_DIM, ExampleBatch
from staytime_lab.losses import bce_loss, listmle_loss_batch, total_loss
from staytime_lab.metrics import xauc
from staytime_lab.models.heads import HeadLabels, make_head
from staytime_lab.nn.attention import MultiHeadSelfAttention
from staytime_lab.nn.checkpoint import load_sections, save_sections
from staytime_lab.nn.embedding import EmbeddingLayer
from staytime_lab.nn.layers import MLP, Dense
from staytime_lab.nn.optim import SGD, Adam
from staytime_lab.nn.params import ParamSet


class _Network:
    """Layer graph shared by training and inference; see module docstring."""

    def __init__(self, params: ParamSet, rng: np.random.Generator, *, base: str,
                 lcu: bool, attach_aux: bool, n_users: int, n_videos: int,
                 emb_dim: int, model_dim: int, n_heads: int, id_dim: int,
                 hidden_dim: int, residual: bool):
        self.lcu = lcu
        self.attach_aux = lcu and attach_aux
        self.residual = residual
        self.model_dim = model_dim
        self.user_emb = EmbeddingLayer(params, "enc/user", n_users, id_dim, rng)
        self.video_emb = EmbeddingLayer(params, "enc/video", n_videos, id_dim, rng)
        self.user_proj = Dense(params, "enc/user_proj",
                               USER_FEATURE_DIM + id_dim, model_dim, rng)
        self.video_proj = Dense(params, "enc/video_proj",
                                VIDEO_FEATURE_DIM + id_dim, model_dim, rng)
        if lcu:
            if emb_dim <= 0:
                raise ConfigError("lcu=True requires embedding tables in the batch")
            self.ev_mlp = MLP(params, "lcu/ev_proj", [emb_dim, hidden_dim, model_dim], rng)
            self.ec_mlp = MLP(params, "lcu/ec_proj", [emb_dim, hidden_dim, model_dim], rng)
            self.mhsa = MultiHeadSelfAttention(params, "lcu/mhsa", model_dim, n_heads, rng)
            head_in = 4 * model_dim
        else:
            head_in = 2 * model_dim
        self.head = make_head(base, params, head_in, hidden_dim, rng)
        if self.attach_aux:
            # registered last so shared initialization matches a detached build
            self.aux_pop = MLP(params, "aux/pop", [model_dim, hidden_dim, hidden_dim, 1], rng)
            self.aux_inter = MLP(params, "aux/inter",
                                 [model_dim, hidden_dim, hidden_dim, 1], rng)

    def forward(self, b: ExampleBatch):
        """Returns (head input x, aux popularity scores, aux interaction logits)."""
        B = len(b)
        u_tok = self.user_proj.forward(
            np.concatenate([b.user_feat, self.user_emb.forward(b.user_row)], axis=1))
        v_tok = self.video_proj.forward(
            np.concatenate([b.video_feat, self.video_emb.forward(b.video_row)], axis=1))
        if not self.lcu:
            self._cache = (b, None)
            return np.concatenate([u_tok, v_tok], axis=1), None, None

        k = b.cmt_mask.shape[1]
        D = self.model_dim
        ev_tok = self.ev_mlp.forward(b.ev)
        ec_tok = self.ec_mlp.forward(b.ec.reshape(B * k, -1)).reshape(B, k, D)
        ec_tok = ec_tok * b.cmt_mask[:, :, None]  # padded slots are zero tokens
        tokens = np.concatenate(
            [u_tok[:, None, :], v_tok[:, None, :], ev_tok[:, None, :], ec_tok], axis=1)
        token_mask = np.concatenate(
            [np.ones((B, 3), dtype=bool), b.cmt_mask], axis=1)
        fused = self.mhsa.forward(tokens, token_mask)
        if self.residual:
            fused = fused + tokens

        slot_rows = fused[:, 3:, :]
        counts = np.maximum(b.cmt_mask.sum(axis=1, keepdims=True), 1)
        pooled = (slot_rows * b.cmt_mask[:, :, None]).sum(axis=1) / counts
        x = np.concatenate([fused[:, 0], fused[:, 1], fused[:, 2], pooled], axis=1)

        aux1 = aux2 = None
        if self.attach_aux:
            flat = slot_rows.reshape(B * k, D)
            aux1 = self.aux_pop.forward(flat)[:, 0].reshape(B, k)
            aux2 = self.aux_inter.forward(flat)[:, 0].reshape(B, k)
        self._cache = (b, counts)
        return x, aux1, aux2

    def backward(self, dx: np.ndarray, daux1, daux2) -> None:
        b, counts = self._cache
        B = len(b)
        D = self.model_dim
        if not self.lcu:
            du_tok = dx[:, :D]
            dv_tok = dx[:, D:]
        else:
            k = b.cmt_mask.shape[1]
            d_fused = np.zeros((B, 3 + k, D))
            d_fused[:, 0] = dx[:, :D]
            d_fused[:, 1] = dx[:, D:2 * D]
            d_fused[:, 2] = dx[:, 2 * D:3 * D]
            d_pooled = dx[:, 3 * D:]
            d_fused[:, 3:] += (d_pooled[:, None, :] * b.cmt_mask[:, :, None]) / counts[:, :, None]
            if self.attach_aux:
                flat1 = self.aux_pop.backward(daux1.reshape(B * k, 1))
                flat2 = self.aux_inter.backward(daux2.reshape(B * k, 1))
                d_fused[:, 3:] += (flat1 + flat2).reshape(B, k, D)
            d_tokens = self.mhsa.backward(d_fused)
            if self.residual:
                d_tokens = d_tokens + d_fused
            d_ec = d_tokens[:, 3:] * b.cmt_mask[:, :, None]
            k_ = b.cmt_mask.shape[1]
            self.ec_mlp.backward(d_ec.reshape(B * k_, D))
            self.ev_mlp.backward(d_tokens[:, 2])
            du_tok = d_tokens[:, 0]
            dv_tok = d_tokens[:, 1]
        du_in = self.user_proj.backward(du_tok)
        dv_in = self.video_proj.backward(dv_tok)
        self.user_emb.backward(du_in[:, USER_FEATURE_DIM:])
        self.video_emb.backward(dv_in[:, VIDEO_FEATURE_DIM:])


class StaytimeModel(BaseEstimator):
    """Staytime predictor with optional embedding fusion and auxiliary ranking.

    Parameters mirror the experiment configuration; ``base`` picks the head
    kind ('vr', 'wlr', 'ndt', 'pcr', 'd2q'), ``lcu`` switches the fused
    representation on, and ``attach_aux=False`` removes the auxiliary towers
    entirely (used to verify that zero weights match a detached build).
    """

    def __init__(self, base: str = "vr", lcu: bool = False, lambda1: float = 1e-2,
                 lambda2: float = 1e-2, model_dim: int = 32, n_heads: int = 2,
                 id_dim: int = 16, hidden_dim: int = 32, learning_rate: float = 3e-3,
                 batch_size: int = 128, max_epochs: int = 8, patience: int = 2,
                 optimizer: str = "adam", residual: bool = True,
                 attach_aux: bool = True, seed: int = 0):
        self.base = base
        self.lcu = lcu
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.model_dim = model_dim
        self.n_heads = n_heads
        self.id_dim = id_dim
        self.hidden_dim = hidden_dim
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.optimizer = optimizer
        self.residual = residual
        self.attach_aux = attach_aux
        self.seed = seed

    # -- construction -----------------------------------------------------

    def _build(self, n_users: int, n_videos: int, emb_dim: int) -> None:
        seq = np.random.SeedSequence(self.seed)
        init_seed, shuffle_seed = seq.spawn(2)
        init_rng = np.random.default_rng(init_seed)
        self._shuffle_rng = np.random.default_rng(shuffle_seed)
        self.params_ = ParamSet()
        self.net_ = _Network(
            self.params_, init_rng, base=self.base, lcu=self.lcu,
            attach_aux=self.attach_aux, n_users=n_users, n_videos=n_videos,
            emb_dim=emb_dim, model_dim=self.model_dim, n_heads=self.n_heads,
            id_dim=self.id_dim, hidden_dim=self.hidden_dim, residual=self.residual,
        )
        self._dims = (n_users, n_videos, emb_dim)

    def _labels(self, b: ExampleBatch, extra: dict) -> HeadLabels:
        return HeadLabels(b.staytime, b.opened, b.duration, extra)

    def _batch_losses(self, b: ExampleBatch, extra: dict):
        """One forward/backward pass; returns the loss components."""
        x, aux1, aux2 = self.net_.forward(b)
        st_loss, dx = self.net_.head.loss_and_grad(x, self._labels(b, extra))

        l1 = l2 = 0.0
        daux1 = daux2 = None
        if self.net_.attach_aux:
            daux1 = np.zeros_like(aux1)
            daux2 = np.zeros_like(aux2)
            rows = b.opened & (b.cmt_mask.any(axis=1))
            if rows.any():
                l1, g1 = listmle_loss_batch(aux1[rows], b.pop_order[rows],
                                            b.cmt_mask[rows])
                l2, g2 = bce_loss(aux2[rows], b.cmt_labels[rows], b.cmt_mask[rows])
                daux1[rows] = self.lambda1 * g1
                daux2[rows] = self.lambda2 * g2
        self.net_.backward(dx, daux1, daux2)
        return total_loss(st_loss, l1, l2, self.lambda1, self.lambda2), st_loss, l1, l2

    # -- estimator API -----------------------------------------------------

    def fit(self, train: ExampleBatch, val: ExampleBatch | None = None) -> "StaytimeModel":
        emb_dim = train.ev.shape[1]
        self._build(train.n_users, train.n_videos, emb_dim)

        head = self.net_.head
        train_labels = self._labels(train, {})
        head.prepare(train_labels)
        if not head.uses_nonopened:
            train = train.take(np.flatnonzero(train.opened))
        train_extra = head.split_extra(self._labels(train, {}))

        opt = (Adam(self.params_, lr=self.learning_rate) if self.optimizer == "adam"
               else SGD(self.params_, lr=self.learning_rate))

        n = len(train)
        if n == 0:
            raise FitError("empty training split")
        best_metric = -np.inf
        best_snapshot = None
        last_good = self.params_.snapshot()
        bad_epochs = 0
        self.history_ = []
        self.diverged_ = False
        self.fitted_ = True  # predict_rank is used for validation mid-fit

        for epoch in range(self.max_epochs):
            perm = self._shuffle_rng.permutation(n)
            sums = np.zeros(4)
            n_batches = 0
            diverged = False
            for lo in range(0, n, self.batch_size):
                idx = perm[lo:lo + self.batch_size]
                mb = train.take(idx)
                extra = {k: v[idx] for k, v in train_extra.items()}
                self.params_.zero_grads()
                losses = self._batch_losses(mb, extra)
                if not np.isfinite(losses[0]):
                    diverged = True
                    break
                opt.step()
                sums += losses
                n_batches += 1
            if diverged:
                self.params_.restore(last_good)
                self.diverged_ = True
                self.history_.append({"epoch": epoch, "aborted": True})
                break
            last_good = self.params_.snapshot()

            entry = {
                "epoch": epoch,
                "train_total": sums[0] / max(n_batches, 1),
                "train_staytime": sums[1] / max(n_batches, 1),
                "train_l_r1": sums[2] / max(n_batches, 1),
                "train_l_r2": sums[3] / max(n_batches, 1),
            }
            if val is not None and len(val):
                opened = val.opened
                scores = self.predict_rank(val.take(np.flatnonzero(opened)))
                metric = xauc(scores, val.staytime[opened])
                entry["val_xauc"] = metric
                if metric > best_metric:
                    best_metric = metric
                    best_snapshot = self.params_.snapshot()
                    bad_epochs = 0
                else:
                    bad_epochs += 1
            self.history_.append(entry)
            if val is not None and bad_epochs >= self.patience:
                break

        if best_snapshot is not None:
            self.params_.restore(best_snapshot)
        return self

    def _check_fitted(self):
        if not getattr(self, "fitted_", False):
            raise NotFittedError("call fit() or load_weights() first")

    def _forward_chunks(self, batch: ExampleBatch, chunk: int = 4096):
        for lo in range(0, len(batch), chunk):
            yield batch.take(np.arange(lo, min(lo + chunk, len(batch))))

    def predict_staytime(self, batch: ExampleBatch) -> np.ndarray:
        self._check_fitted()
        out = []
        for mb in self._forward_chunks(batch):
            x, _, _ = self.net_.forward(mb)
            out.append(self.net_.head.predict_staytime(x, mb.duration))
        return np.concatenate(out) if out else np.empty(0)

    def predict_rank(self, batch: ExampleBatch) -> np.ndarray:
        self._check_fitted()
        out = []
        for mb in self._forward_chunks(batch):
            x, _, _ = self.net_.forward(mb)
            out.append(self.net_.head.predict_rank(x))
        return np.concatenate(out) if out else np.empty(0)

    def aux_scores(self, batch: ExampleBatch):
        """Per-slot popularity scores and interaction logits (lcu only)."""
        self._check_fitted()
        if not self.net_.attach_aux:
            raise ConfigError("auxiliary scores require lcu=True and attach_aux=True")
        s1, s2 = [], []
        for mb in self._forward_chunks(batch):
            _, a1, a2 = self.net_.forward(mb)
            s1.append(a1)
            s2.append(a2)
        return np.concatenate(s1), np.concatenate(s2)

    # -- persistence --------------------------------------------------------

    def save_weights(self, path) -> None:
        self._check_fitted()
        sections = {p.name: p.value for p in self.params_}
        sections.update(self.net_.head.state_sections())
        sections["meta/dims"] = np.array([list(self._dims)], dtype=np.float64)
        save_sections(path, sections)

    def load_weights(self, path) -> "StaytimeModel":
        sections = load_sections(path)
        n_users, n_videos, emb_dim = (int(v) for v in sections["meta/dims"][0])
        self._build(n_users, n_videos, emb_dim)
        for p in self.params_:
            if p.name not in sections:
                raise FitError(f"checkpoint is missing parameter {p.name!r}")
            if sections[p.name].shape != p.value.shape:
                raise FitError(
                    f"checkpoint shape {sections[p.name].shape} != expected "
                    f"{p.value.shape} for {p.name!r}; config mismatch")
            p.value[...] = sections[p.name]
        self.net_.head.load_state(sections)
        self.history_ = []
        self.fitted_ = True
        return self
