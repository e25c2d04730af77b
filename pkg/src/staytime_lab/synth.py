"""Seeded synthetic dataset generator.

The generator plants a latent topic space shared by users, videos and
comments. Observed staytime is a closed-form response (documented on
``staytime_response``) times mean-one lognormal noise, so binned curves over
the generated data reproduce the qualitative engagement relationships the
models are later asked to recover: staytime falls as the top comments'
average likes grow (up to a knee), rises with the number of comment
interactions and with watchtime (with a completion bump), and scales with
user-video topic affinity.

Mock embedding tables expose the latent topic vector and quality scalar
(plus seeded noise), so an embedding-aware model has genuine signal that the
id-only feature set lacks. Everything is a pure function of the config,
including its seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from staytime_lab.embeddings import EmbeddingTable
from staytime_lab.errors import ConfigError
from staytime_lab.records import (
    CommentInteraction,
    CommentRecord,
    Dataset,
    ImpressionRecord,
    UserHistory,
    UserRecord,
    VideoRecord,
    popularity_key,
)


@dataclass
class GeneratorConfig:
    n_users: int = 600
    n_videos: int = 800
    n_impressions: int = 50_000
    comments_per_video: tuple[int, int] = (10, 40)
    like_exponent: float = 1.6        # power-law tail of like counts
    like_scale: float = 30.0
    open_rate: float = 0.7
    noise_sigma: float = 0.3          # lognormal sigma on staytime
    latent_dim: int = 8
    seed: int = 0

    # response shape (see staytime_response)
    base_staytime_s: float = 9.0
    likes_knee: float = 400.0
    likes_floor: float = 0.35
    likes_decay: float = 0.008
    interactions_knee: int = 20
    interactions_gain: float = 0.45
    watch_gain: float = 0.06
    completion_bonus: float = 0.3
    completion_threshold_s: float = 240.0

    # interaction draw: sigmoid(base + affinity_w * <u,c> + quality_w * (q - 1))
    interaction_base: float = -1.8
    interaction_affinity_w: float = 3.0
    interaction_quality_w: float = 0.9

    duration_range_s: tuple[float, float] = (15.0, 600.0)
    embedding_noise: float = 0.1
    comment_topic_spread: float = 0.6  # comment topics scatter around the video topic

    def validate(self) -> None:
        if min(self.n_users, self.n_videos, self.n_impressions) <= 0:
            raise ConfigError("n_users, n_videos and n_impressions must be positive")
        lo, hi = self.comments_per_video
        if not (1 <= lo <= hi):
            raise ConfigError(f"comments_per_video range {self.comments_per_video} is empty")
        if not self.like_exponent > 1:
            raise ConfigError("like_exponent must exceed 1")
        if not 0 < self.open_rate < 1:
            raise ConfigError("open_rate must lie in (0, 1)")
        if not self.noise_sigma > 0:
            raise ConfigError("noise_sigma must be positive")
        if self.latent_dim <= 0:
            raise ConfigError("latent_dim must be positive")
        d_lo, d_hi = self.duration_range_s
        if not 0 < d_lo <= d_hi:
            raise ConfigError(f"duration_range_s {self.duration_range_s} is empty")
        if not (0 < self.likes_floor < 1 and self.likes_decay > 0 and self.likes_knee > 0):
            raise ConfigError("likes term needs floor in (0,1), positive decay and knee")


@dataclass
class LatentState:
    """Ground truth the mock embedder and the staytime response both read."""

    user_topics: np.ndarray      # (n_users, latent_dim), unit rows
    video_topics: np.ndarray     # (n_videos, latent_dim), unit rows
    comment_topics: np.ndarray   # (n_comments, latent_dim), unit rows
    comment_quality: np.ndarray  # (n_comments,), >= 0
    video_quality: np.ndarray = field(default=None)  # mean comment quality per video


def _unit_rows(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    x = rng.normal(size=(n, dim))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def staytime_response(cfg: GeneratorConfig, avg_top5_likes, n_interactions,
                      watchtime_s, duration_s, affinity):
    """Expected staytime, a product of four documented terms.

    * likes: ``floor + (1 - floor) * exp(-decay * min(L, knee))`` -- strictly
      decreasing until the knee, constant after;
    * interactions: ``1 + gain * log1p(min(n, knee))`` -- increasing,
      saturating at the knee;
    * watchtime: ``1 + gain * log1p(w)`` plus a completion bonus once
      ``w >= min(duration, completion_threshold)``;
    * affinity: ``1 + 0.5 * clip(a, -1, 1)`` in [0.5, 1.5].

    All inputs may be scalars or broadcastable arrays; output is positive.
    """
    L = np.minimum(np.asarray(avg_top5_likes, dtype=np.float64), cfg.likes_knee)
    likes_term = cfg.likes_floor + (1.0 - cfg.likes_floor) * np.exp(-cfg.likes_decay * L)
    n = np.minimum(np.asarray(n_interactions, dtype=np.float64), cfg.interactions_knee)
    inter_term = 1.0 + cfg.interactions_gain * np.log1p(n)
    w = np.asarray(watchtime_s, dtype=np.float64)
    completed = w >= np.minimum(np.asarray(duration_s, dtype=np.float64),
                                cfg.completion_threshold_s)
    watch_term = 1.0 + cfg.watch_gain * np.log1p(w) + cfg.completion_bonus * completed
    aff_term = 1.0 + 0.5 * np.clip(np.asarray(affinity, dtype=np.float64), -1.0, 1.0)
    return cfg.base_staytime_s * likes_term * inter_term * watch_term * aff_term


def _f32_exact(x: np.ndarray) -> np.ndarray:
    # embedding files store f32; keep table values exactly representable
    return x.astype(np.float32).astype(np.float64)


def generate_synthetic(cfg: GeneratorConfig):
    """Build (dataset, latent state, video table, comment table) from the config."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)

    user_topics = _unit_rows(rng, cfg.n_users, cfg.latent_dim)
    activity = rng.integers(0, 5, size=cfg.n_users)

    video_topics = _unit_rows(rng, cfg.n_videos, cfg.latent_dim)
    log_lo, log_hi = np.log(cfg.duration_range_s[0]), np.log(cfg.duration_range_s[1])
    durations = np.exp(rng.uniform(log_lo, log_hi, size=cfg.n_videos))
    # staggered availability so late (test-window) impressions hit cold videos
    horizon = 1_000_000
    t0 = 1_700_000_000
    birth = rng.uniform(-0.3 * horizon, 0.95 * horizon, size=cfg.n_videos)

    # comments
    lo, hi = cfg.comments_per_video
    counts = rng.integers(lo, hi + 1, size=cfg.n_videos)
    n_comments = int(counts.sum())
    comment_video = np.repeat(np.arange(cfg.n_videos), counts)
    noise = rng.normal(size=(n_comments, cfg.latent_dim)) * cfg.comment_topic_spread
    ctopics = video_topics[comment_video] + noise
    ctopics = ctopics / np.linalg.norm(ctopics, axis=1, keepdims=True)
    quality = rng.gamma(shape=2.0, scale=0.5, size=n_comments)
    pareto = rng.pareto(cfg.like_exponent, size=n_comments)
    likes = np.floor(pareto * cfg.like_scale * (0.5 + quality)).astype(np.int64)
    replies = np.floor(likes * rng.uniform(0.0, 0.25, size=n_comments)).astype(np.int64)
    replies += rng.poisson(0.3, size=n_comments)

    comments = tuple(
        CommentRecord(cid, int(comment_video[cid]), int(likes[cid]), int(replies[cid]),
                      f"comment text {cid}")
        for cid in range(n_comments)
    )

    comment_ids_by_video: list[tuple[int, ...]] = []
    start = 0
    for vid in range(cfg.n_videos):
        ids = list(range(start, start + int(counts[vid])))
        ids.sort(key=lambda c: popularity_key(int(likes[c]), int(replies[c]), c))
        comment_ids_by_video.append(tuple(ids))
        start += int(counts[vid])

    videos = tuple(
        VideoRecord(vid, float(durations[vid]), f"caption video {vid}",
                    comment_ids_by_video[vid])
        for vid in range(cfg.n_videos)
    )

    avg_top5 = np.array([
        np.mean([likes[c] for c in comment_ids_by_video[vid][:5]])
        for vid in range(cfg.n_videos)
    ])
    video_quality = np.zeros(cfg.n_videos)
    start = 0
    for vid in range(cfg.n_videos):
        video_quality[vid] = quality[start:start + int(counts[vid])].mean()
        start += int(counts[vid])

    # impressions, chronological
    ts = np.sort(rng.integers(0, horizon, size=cfg.n_impressions)) + t0
    imp_user = rng.integers(0, cfg.n_users, size=cfg.n_impressions)
    imp_video = np.empty(cfg.n_impressions, dtype=np.int64)
    # recency-weighted video choice among those already published
    n_chunks = 100
    for chunk in np.array_split(np.arange(cfg.n_impressions), n_chunks):
        if chunk.size == 0:
            continue
        t_mid = float(ts[chunk].mean()) - t0
        alive = np.flatnonzero(birth <= t_mid)
        if alive.size == 0:
            alive = np.array([int(birth.argmin())])
        age = t_mid - birth[alive]
        weights = np.exp(-age / (0.25 * horizon)) + 0.15
        weights /= weights.sum()
        imp_video[chunk] = alive[rng.choice(alive.size, size=chunk.size, p=weights)]

    opened = rng.random(cfg.n_impressions) < cfg.open_rate
    dur = durations[imp_video]
    full = rng.random(cfg.n_impressions) < 0.25
    frac = np.where(full, rng.uniform(1.0, 1.25, size=cfg.n_impressions),
                    rng.beta(1.8, 1.6, size=cfg.n_impressions))
    watchtime = dur * frac

    affinity = np.einsum("ij,ij->i", user_topics[imp_user], video_topics[imp_video])

    interacted: list[tuple[int, ...]] = []
    n_inter = np.zeros(cfg.n_impressions, dtype=np.int64)
    interaction_rows: list[CommentInteraction] = []
    for i in range(cfg.n_impressions):
        if not opened[i]:
            interacted.append(())
            continue
        cids = comment_ids_by_video[imp_video[i]]
        ids = np.asarray(cids)
        aff_c = ctopics[ids] @ user_topics[imp_user[i]]
        logit = (cfg.interaction_base + cfg.interaction_affinity_w * aff_c
                 + cfg.interaction_quality_w * (quality[ids] - 1.0))
        hit = rng.random(ids.size) < 1.0 / (1.0 + np.exp(-logit))
        chosen = ids[hit]
        if chosen.size:
            chosen = chosen[rng.permutation(chosen.size)]  # interaction-time order
        interacted.append(tuple(int(c) for c in chosen))
        n_inter[i] = chosen.size
        for j, c in enumerate(chosen):
            kind = "like" if rng.random() < 0.8 else "reply"
            interaction_rows.append(
                CommentInteraction(int(imp_user[i]), int(imp_video[i]), int(c),
                                   int(ts[i]) + j + 1, kind)
            )

    mean_stay = staytime_response(cfg, avg_top5[imp_video], n_inter, watchtime, dur, affinity)
    lognoise = np.exp(rng.normal(-0.5 * cfg.noise_sigma ** 2, cfg.noise_sigma,
                                 size=cfg.n_impressions))
    staytime = np.where(opened, mean_stay * lognoise, 0.0)

    impressions = tuple(
        ImpressionRecord(int(imp_user[i]), int(imp_video[i]), int(ts[i]), bool(opened[i]),
                         float(staytime[i]), float(watchtime[i]), interacted[i])
        for i in range(cfg.n_impressions)
    )

    # user histories from the user's own impressions, ascending time
    hist_videos: dict[int, list[int]] = {u: [] for u in range(cfg.n_users)}
    hist_inter: dict[int, list[int]] = {u: [] for u in range(cfg.n_users)}
    for imp in impressions:
        hist_videos[imp.user_id].append(imp.video_id)
        hist_inter[imp.user_id].extend(imp.interacted_comment_ids)
    users = tuple(
        UserRecord(u, int(activity[u]),
                   UserHistory(tuple(hist_videos[u]), tuple(hist_inter[u])))
        for u in range(cfg.n_users)
    )

    dataset = Dataset(users, videos, comments, impressions, tuple(interaction_rows))
    latent = LatentState(user_topics, video_topics, ctopics, quality, video_quality)

    emb_dim = cfg.latent_dim + 1
    video_table = EmbeddingTable(emb_dim)
    vnoise = rng.normal(0.0, cfg.embedding_noise, size=(cfg.n_videos, emb_dim))
    for vid in range(cfg.n_videos):
        vec = np.concatenate([video_topics[vid], [video_quality[vid]]]) + vnoise[vid]
        video_table.put(vid, _f32_exact(vec))
    comment_table = EmbeddingTable(emb_dim)
    cnoise = rng.normal(0.0, cfg.embedding_noise, size=(n_comments, emb_dim))
    for cid in range(n_comments):
        vec = np.concatenate([ctopics[cid], [quality[cid]]]) + cnoise[cid]
        comment_table.put(cid, _f32_exact(vec))

    return dataset, latent, video_table, comment_table
