"""Assembly of training examples: flat arrays ready for mini-batching.

The per-impression example carries the user/video feature vectors, the
fixed-k sampled comment slots with mask and interaction labels, the LLM
embedding rows for the video and the sampled comments, and all labels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from staytime_lab.embeddings import EmbeddingTable
from staytime_lab.records import (
    CommentIndex,
    Dataset,
    SamplingStats,
    build_comment_index,
    sample_comments,
)

N_ACTIVITY_LEVELS = 5
USER_FEATURE_DIM = N_ACTIVITY_LEVELS + 2   # one-hot activity, log history sizes
VIDEO_FEATURE_DIM = 5                      # duration, #comments, avg top-5 likes,
                                           # watchtime, completed flag


@dataclass
class ExampleBatch:
    """Column arrays over one split's impressions."""

    user_row: np.ndarray      # (N,) index into the dataset's user order
    video_row: np.ndarray     # (N,)
    user_feat: np.ndarray     # (N, USER_FEATURE_DIM)
    video_feat: np.ndarray    # (N, VIDEO_FEATURE_DIM)
    ev: np.ndarray            # (N, emb_dim) video embedding rows
    ec: np.ndarray            # (N, k, emb_dim) comment embedding rows
    cmt_mask: np.ndarray      # (N, k) bool
    cmt_labels: np.ndarray    # (N, k) float, interaction labels
    pop_order: np.ndarray     # (N, k) slot indices in popularity order, -1 pad
    staytime: np.ndarray      # (N,)
    watchtime: np.ndarray
    duration: np.ndarray
    opened: np.ndarray        # (N,) bool
    user_ids: np.ndarray
    video_ids: np.ndarray
    timestamps: np.ndarray
    n_users: int
    n_videos: int
    missing_video_embeddings: int = 0
    missing_comment_embeddings: int = 0

    def __len__(self):
        return self.staytime.shape[0]

    def take(self, idx: np.ndarray) -> "ExampleBatch":
        return ExampleBatch(
            self.user_row[idx], self.video_row[idx], self.user_feat[idx],
            self.video_feat[idx], self.ev[idx], self.ec[idx], self.cmt_mask[idx],
            self.cmt_labels[idx], self.pop_order[idx], self.staytime[idx],
            self.watchtime[idx], self.duration[idx], self.opened[idx],
            self.user_ids[idx], self.video_ids[idx], self.timestamps[idx],
            self.n_users, self.n_videos,
            self.missing_video_embeddings, self.missing_comment_embeddings,
        )


class FeatureBuilder:
    """Turns canonical records into model-ready arrays.

    Built once per dataset; reused across splits so row indices and feature
    scaling are consistent everywhere.
    """

    def __init__(self, dataset: Dataset, video_table: EmbeddingTable | None = None,
                 comment_table: EmbeddingTable | None = None, k: int = 6,
                 top_m: int = 7, missing_embedding: str = "zero"):
        self.dataset = dataset
        self.k = k
        self.top_m = top_m
        self.missing_embedding = missing_embedding
        self.video_table = video_table
        self.comment_table = comment_table
        self.index: CommentIndex = build_comment_index(
            dataset.comments, known_video_ids={v.video_id for v in dataset.videos}
        )
        self.sampling_stats = SamplingStats()

        self.user_pos = {u.user_id: i for i, u in enumerate(dataset.users)}
        self.video_pos = {v.video_id: i for i, v in enumerate(dataset.videos)}

        self._user_feat = np.zeros((len(dataset.users), USER_FEATURE_DIM))
        for i, u in enumerate(dataset.users):
            self._user_feat[i, u.activity_level] = 1.0
            self._user_feat[i, N_ACTIVITY_LEVELS] = np.log1p(len(u.history.video_ids))
            self._user_feat[i, N_ACTIVITY_LEVELS + 1] = np.log1p(
                len(u.history.comment_interaction_ids))

        self._avg_top5 = np.zeros(len(dataset.videos))
        self._n_comments = np.zeros(len(dataset.videos))
        self._duration = np.zeros(len(dataset.videos))
        for i, v in enumerate(dataset.videos):
            top5 = v.comment_ids[:5]
            if top5:
                self._avg_top5[i] = np.mean([self.index.key(c)[0] for c in top5])
            self._n_comments[i] = len(v.comment_ids)
            self._duration[i] = v.duration_s

    @property
    def emb_dim(self) -> int:
        return self.video_table.dim if self.video_table is not None else 0

    def build(self, impressions) -> ExampleBatch:
        impressions = list(impressions)
        n = len(impressions)
        k = self.k
        emb_dim = self.emb_dim

        user_row = np.empty(n, dtype=np.int64)
        video_row = np.empty(n, dtype=np.int64)
        video_feat = np.zeros((n, VIDEO_FEATURE_DIM))
        ec = np.zeros((n, k, emb_dim)) if emb_dim else np.zeros((n, k, 0))
        cmt_ids = np.full((n, k), -1, dtype=np.int64)
        cmt_mask = np.zeros((n, k), dtype=bool)
        cmt_labels = np.zeros((n, k))
        pop_order = np.full((n, k), -1, dtype=np.int64)
        staytime = np.empty(n)
        watchtime = np.empty(n)
        opened = np.empty(n, dtype=bool)
        user_ids = np.empty(n, dtype=np.int64)
        video_ids = np.empty(n, dtype=np.int64)
        timestamps = np.empty(n, dtype=np.int64)
        missing_c = 0

        for i, imp in enumerate(impressions):
            ur = self.user_pos[imp.user_id]
            vr = self.video_pos[imp.video_id]
            user_row[i] = ur
            video_row[i] = vr
            user_ids[i] = imp.user_id
            video_ids[i] = imp.video_id
            timestamps[i] = imp.timestamp
            staytime[i] = imp.staytime_s
            watchtime[i] = imp.watchtime_s
            opened[i] = imp.opened

            dur = self._duration[vr]
            video_feat[i] = (
                np.log1p(dur), np.log1p(self._n_comments[vr]),
                np.log1p(self._avg_top5[vr]), np.log1p(imp.watchtime_s),
                1.0 if imp.watchtime_s >= dur else 0.0,
            )

            sampled = sample_comments(imp, self.index, k=k, top_m=self.top_m,
                                      stats=self.sampling_stats)
            m = sum(sampled.mask)
            cmt_ids[i, :] = sampled.comment_ids
            cmt_mask[i, :] = sampled.mask
            cmt_labels[i, :] = [1.0 if b else 0.0 for b in sampled.interaction_labels]
            pop_order[i, :m] = np.arange(m)  # slots already popularity-sorted

        if emb_dim:
            ev, missing_v = self.video_table.gather(video_ids,
                                                    missing=self.missing_embedding)
            ec_flat, missing_c = self.comment_table.gather(cmt_ids.reshape(-1),
                                                           missing=self.missing_embedding)
            ec = ec_flat.reshape(n, k, emb_dim)
        else:
            ev = np.zeros((n, 0))
            missing_v = 0

        duration = self._duration[video_row]
        return ExampleBatch(
            user_row, video_row, self._user_feat[user_row], video_feat, ev, ec,
            cmt_mask, cmt_labels, pop_order, staytime, watchtime, duration, opened,
            user_ids, video_ids, timestamps,
            n_users=len(self.dataset.users), n_videos=len(self.dataset.videos),
            missing_video_embeddings=missing_v, missing_comment_embeddings=missing_c,
        )
