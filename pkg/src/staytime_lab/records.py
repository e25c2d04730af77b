"""Canonical data types for users, videos, comments and impressions.

All records are immutable after construction; list-valued fields are stored
as tuples. The comment index supports concurrent reads once built.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from staytime_lab.errors import DataValidationError


@dataclass(frozen=True)
class UserHistory:
    """Per-user interaction history, both lists ordered by ascending timestamp."""

    video_ids: tuple[int, ...] = ()
    comment_interaction_ids: tuple[int, ...] = ()


@dataclass(frozen=True)
class UserRecord:
    user_id: int
    activity_level: int
    history: UserHistory = field(default_factory=UserHistory)


@dataclass(frozen=True)
class VideoRecord:
    video_id: int
    duration_s: float
    caption_tokens: str = ""
    # canonical popularity order: like desc, reply desc, id asc
    comment_ids: tuple[int, ...] = ()


@dataclass(frozen=True)
class CommentRecord:
    comment_id: int
    video_id: int
    like_count: int
    reply_count: int
    content_tokens: str = ""


@dataclass(frozen=True)
class ImpressionRecord:
    user_id: int
    video_id: int
    timestamp: int
    opened: bool
    staytime_s: float
    watchtime_s: float
    # ascending interaction time; nonempty only when opened
    interacted_comment_ids: tuple[int, ...] = ()


@dataclass(frozen=True)
class CommentInteraction:
    user_id: int
    video_id: int
    comment_id: int
    timestamp: int
    kind: str  # "like" | "reply"


@dataclass(frozen=True)
class SampledComments:
    """Fixed-k comment slots for one impression.

    Real slots carry mask True; padded slots have comment_id -1, mask False
    and interaction_label False. Slots are ordered by descending popularity
    with interacted comments winning popularity ties.
    """

    comment_ids: tuple[int, ...]
    mask: tuple[bool, ...]
    interaction_labels: tuple[bool, ...]
    popularity_keys: tuple[tuple[int, int], ...]  # (like, reply) per real slot


@dataclass(frozen=True)
class Dataset:
    users: tuple[UserRecord, ...]
    videos: tuple[VideoRecord, ...]
    comments: tuple[CommentRecord, ...]
    impressions: tuple[ImpressionRecord, ...]
    interactions: tuple[CommentInteraction, ...] = ()


def popularity_key(like_count: int, reply_count: int, comment_id: int):
    return (-like_count, -reply_count, comment_id)


class CommentIndex:
    """Per-video comment ids in canonical popularity order."""

    def __init__(self, by_video: dict[int, tuple[int, ...]],
                 keys: dict[int, tuple[int, int]]):
        self._by_video = by_video
        self._keys = keys

    def top(self, video_id: int, m: int) -> tuple[int, ...]:
        return self._by_video.get(video_id, ())[:m]

    def comments_of(self, video_id: int) -> tuple[int, ...]:
        return self._by_video.get(video_id, ())

    def key(self, comment_id: int) -> tuple[int, int]:
        """(like_count, reply_count) of a known comment."""
        return self._keys[comment_id]

    def total_comments(self) -> int:
        return sum(len(v) for v in self._by_video.values())


def build_comment_index(comments, known_video_ids=None) -> CommentIndex:
    """Sort every video's comments into canonical popularity order.

    When ``known_video_ids`` is given, a comment referencing an unknown video
    raises a validation error naming the comment.
    """
    grouped: dict[int, list[CommentRecord]] = {}
    keys: dict[int, tuple[int, int]] = {}
    for c in comments:
        if known_video_ids is not None and c.video_id not in known_video_ids:
            raise DataValidationError(
                f"comment {c.comment_id} references unknown video {c.video_id}"
            )
        grouped.setdefault(c.video_id, []).append(c)
        keys[c.comment_id] = (c.like_count, c.reply_count)
    by_video = {
        vid: tuple(
            c.comment_id
            for c in sorted(cs, key=lambda c: popularity_key(c.like_count, c.reply_count,
                                                             c.comment_id))
        )
        for vid, cs in grouped.items()
    }
    return CommentIndex(by_video, keys)


class SamplingStats:
    """Warning counters for the comment sampler; never silently drops."""

    def __init__(self):
        self.interacted_overflow = 0

    def __repr__(self):
        return f"SamplingStats(interacted_overflow={self.interacted_overflow})"


def sample_comments(impression: ImpressionRecord, index: CommentIndex, k: int = 6,
                    top_m: int = 7, stats: SamplingStats | None = None) -> SampledComments:
    """Draw the fixed-k comment slots for one impression.

    Candidate pool = top ``top_m`` comments by popularity plus every comment
    the user interacted with. All interacted comments are kept (the most
    recent k if there are more than k, counted as a warning), then the most
    popular non-interacted candidates fill the remaining slots. Deterministic.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    interacted = list(impression.interacted_comment_ids)
    if len(interacted) > k:
        if stats is not None:
            stats.interacted_overflow += 1
        interacted = interacted[-k:]  # list is ascending in time: keep most recent
    interacted_set = set(interacted)

    chosen = list(interacted)
    for cid in index.top(impression.video_id, top_m):
        if len(chosen) >= k:
            break
        if cid not in interacted_set:
            chosen.append(cid)

    def slot_key(cid: int):
        like, reply = index.key(cid)
        return (-like, -reply, cid not in interacted_set, cid)

    chosen.sort(key=slot_key)

    n_pad = k - len(chosen)
    ids = tuple(chosen) + (-1,) * n_pad
    mask = (True,) * len(chosen) + (False,) * n_pad
    labels = tuple(cid in interacted_set for cid in chosen) + (False,) * n_pad
    keys = tuple(index.key(cid) for cid in chosen)
    return SampledComments(ids, mask, labels, keys)


@dataclass(frozen=True)
class Violation:
    record_type: str
    record_id: int
    message: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def add(self, record_type: str, record_id, message: str) -> None:
        self.violations.append(Violation(record_type, record_id, message))

    def __len__(self):
        return len(self.violations)


def validate_dataset(dataset: Dataset) -> ValidationReport:
    """Check every schema invariant; violations are report entries, not errors."""
    report = ValidationReport()

    seen_users = set()
    for u in dataset.users:
        if u.user_id in seen_users:
            report.add("user", u.user_id, "duplicate user_id")
        seen_users.add(u.user_id)
        if not 0 <= u.activity_level <= 4:
            report.add("user", u.user_id, f"activity_level {u.activity_level} outside [0, 4]")

    comments_by_id = {c.comment_id: c for c in dataset.comments}
    video_ids = set()
    for v in dataset.videos:
        if v.video_id in video_ids:
            report.add("video", v.video_id, "duplicate video_id")
        video_ids.add(v.video_id)
        if not v.duration_s > 0:
            report.add("video", v.video_id, f"duration_s {v.duration_s} not positive")
        keys = []
        for cid in v.comment_ids:
            c = comments_by_id.get(cid)
            if c is None:
                report.add("video", v.video_id, f"comment_ids references unknown comment {cid}")
            else:
                keys.append(popularity_key(c.like_count, c.reply_count, c.comment_id))
        if keys != sorted(keys):
            report.add("video", v.video_id, "comment_ids not in canonical popularity order")

    seen_comments = set()
    for c in dataset.comments:
        if c.comment_id in seen_comments:
            report.add("comment", c.comment_id, "duplicate comment_id")
        seen_comments.add(c.comment_id)
        if c.like_count < 0 or c.reply_count < 0:
            report.add("comment", c.comment_id, "negative like or reply count")
        if c.video_id not in video_ids:
            report.add("comment", c.comment_id, f"references unknown video {c.video_id}")

    video_comments = {v.video_id: set(v.comment_ids) for v in dataset.videos}
    for i, imp in enumerate(dataset.impressions):
        if imp.user_id not in seen_users:
            report.add("impression", i, f"references unknown user {imp.user_id}")
        if imp.video_id not in video_ids:
            report.add("impression", i, f"references unknown video {imp.video_id}")
        if imp.opened:
            if not imp.staytime_s > 0:
                report.add("impression", i, f"opened but staytime_s {imp.staytime_s} <= 0")
        else:
            if imp.staytime_s != 0:
                report.add("impression", i, f"not opened but staytime_s {imp.staytime_s} != 0")
            if imp.interacted_comment_ids:
                report.add("impression", i, "not opened but has interacted comments")
        if imp.watchtime_s < 0:
            report.add("impression", i, f"negative watchtime_s {imp.watchtime_s}")
        allowed = video_comments.get(imp.video_id, set())
        for cid in imp.interacted_comment_ids:
            if cid not in allowed:
                report.add("impression", i,
                           f"interacted comment {cid} does not belong to video {imp.video_id}")

    for j, inter in enumerate(dataset.interactions):
        if inter.user_id not in seen_users:
            report.add("interaction", j, f"references unknown user {inter.user_id}")
        if inter.comment_id not in seen_comments:
            report.add("interaction", j, f"references unknown comment {inter.comment_id}")
        if inter.kind not in ("like", "reply"):
            report.add("interaction", j, f"unknown kind {inter.kind!r}")

    return report
