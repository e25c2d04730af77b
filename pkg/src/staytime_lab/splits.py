"""Chronological train/validation/test splitting of impressions."""

from __future__ import annotations

from staytime_lab.errors import DataValidationError
from staytime_lab.records import ImpressionRecord


def time_split(impressions, ratios: tuple[int, int, int] = (4, 1, 1)):
    """Sort by (timestamp, user_id, video_id) and cut at the ratio boundaries.

    Boundaries floor; the remainder lands in the test split, so every
    impression appears in exactly one part.
    """
    impressions = list(impressions)
    if not impressions:
        raise DataValidationError("cannot split an empty impression list")
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError(f"ratios must be three positive integers, got {ratios}")
    ordered = sorted(impressions, key=lambda i: (i.timestamp, i.user_id, i.video_id))
    n = len(ordered)
    total = sum(ratios)
    cut1 = n * ratios[0] // total
    cut2 = n * (ratios[0] + ratios[1]) // total
    return tuple(ordered[:cut1]), tuple(ordered[cut1:cut2]), tuple(ordered[cut2:])
