"""Canonical on-disk dataset schema.

Five UTF-8 CSV files with headers matching the record field names, lists
serialized as semicolon-joined ids, plus ``manifest.json`` with row counts
and the schema version. Floats are written with ``repr`` so every value
round-trips bit-exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from staytime_lab.errors import DataValidationError
from staytime_lab.records import (
    CommentInteraction,
    CommentRecord,
    Dataset,
    ImpressionRecord,
    UserHistory,
    UserRecord,
    VideoRecord,
)

SCHEMA_VERSION = "staytime-lab/1"

USERS_FILE = "users.csv"
VIDEOS_FILE = "videos.csv"
COMMENTS_FILE = "comments.csv"
IMPRESSIONS_FILE = "impressions.csv"
INTERACTIONS_FILE = "comment_interactions.csv"
MANIFEST_FILE = "manifest.json"

USERS_HEADER = ["user_id", "activity_level", "video_ids", "comment_interaction_ids"]
VIDEOS_HEADER = ["video_id", "duration_s", "caption_tokens", "comment_ids"]
COMMENTS_HEADER = ["comment_id", "video_id", "like_count", "reply_count", "content_tokens"]
IMPRESSIONS_HEADER = ["user_id", "video_id", "timestamp", "opened", "staytime_s",
                      "watchtime_s", "interacted_comment_ids"]
INTERACTIONS_HEADER = ["user_id", "video_id", "comment_id", "timestamp", "kind"]


def join_ids(ids) -> str:
    return ";".join(str(i) for i in ids)


def split_ids(text: str) -> tuple[int, ...]:
    if not text:
        return ()
    return tuple(int(t) for t in text.split(";"))


def parse_bool(text: str) -> bool:
    if text == "true":
        return True
    if text == "false":
        return False
    raise ValueError(f"expected 'true' or 'false', got {text!r}")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def save_dataset(dataset: Dataset, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / USERS_FILE, USERS_HEADER, (
        [u.user_id, u.activity_level, join_ids(u.history.video_ids),
         join_ids(u.history.comment_interaction_ids)]
        for u in dataset.users
    ))
    _write_csv(out / VIDEOS_FILE, VIDEOS_HEADER, (
        [v.video_id, repr(float(v.duration_s)), v.caption_tokens, join_ids(v.comment_ids)]
        for v in dataset.videos
    ))
    _write_csv(out / COMMENTS_FILE, COMMENTS_HEADER, (
        [c.comment_id, c.video_id, c.like_count, c.reply_count, c.content_tokens]
        for c in dataset.comments
    ))
    _write_csv(out / IMPRESSIONS_FILE, IMPRESSIONS_HEADER, (
        [i.user_id, i.video_id, i.timestamp, "true" if i.opened else "false",
         repr(float(i.staytime_s)), repr(float(i.watchtime_s)),
         join_ids(i.interacted_comment_ids)]
        for i in dataset.impressions
    ))
    _write_csv(out / INTERACTIONS_FILE, INTERACTIONS_HEADER, (
        [x.user_id, x.video_id, x.comment_id, x.timestamp, x.kind]
        for x in dataset.interactions
    ))
    manifest = {
        "schema": SCHEMA_VERSION,
        "rows": {
            "users": len(dataset.users),
            "videos": len(dataset.videos),
            "comments": len(dataset.comments),
            "impressions": len(dataset.impressions),
            "comment_interactions": len(dataset.interactions),
        },
    }
    (out / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def _read_csv(path: Path, header) -> list[dict]:
    if not path.exists():
        raise DataValidationError(f"missing dataset file {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != header:
            raise DataValidationError(
                f"{path.name}: header {reader.fieldnames} != expected {header}"
            )
        return list(reader)


def load_dataset(in_dir) -> Dataset:
    """Read a canonical dataset directory written by ``save_dataset``."""
    src = Path(in_dir)
    manifest_path = src / MANIFEST_FILE
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        if manifest.get("schema") != SCHEMA_VERSION:
            raise DataValidationError(
                f"unsupported dataset schema {manifest.get('schema')!r}"
            )

    users = tuple(
        UserRecord(int(r["user_id"]), int(r["activity_level"]),
                   UserHistory(split_ids(r["video_ids"]),
                               split_ids(r["comment_interaction_ids"])))
        for r in _read_csv(src / USERS_FILE, USERS_HEADER)
    )
    videos = tuple(
        VideoRecord(int(r["video_id"]), float(r["duration_s"]), r["caption_tokens"],
                    split_ids(r["comment_ids"]))
        for r in _read_csv(src / VIDEOS_FILE, VIDEOS_HEADER)
    )
    comments = tuple(
        CommentRecord(int(r["comment_id"]), int(r["video_id"]), int(r["like_count"]),
                      int(r["reply_count"]), r["content_tokens"])
        for r in _read_csv(src / COMMENTS_FILE, COMMENTS_HEADER)
    )
    impressions = tuple(
        ImpressionRecord(int(r["user_id"]), int(r["video_id"]), int(r["timestamp"]),
                         parse_bool(r["opened"]), float(r["staytime_s"]),
                         float(r["watchtime_s"]), split_ids(r["interacted_comment_ids"]))
        for r in _read_csv(src / IMPRESSIONS_FILE, IMPRESSIONS_HEADER)
    )
    interactions = tuple(
        CommentInteraction(int(r["user_id"]), int(r["video_id"]), int(r["comment_id"]),
                           int(r["timestamp"]), r["kind"])
        for r in _read_csv(src / INTERACTIONS_FILE, INTERACTIONS_HEADER)
    )
    return Dataset(users, videos, comments, impressions, interactions)
