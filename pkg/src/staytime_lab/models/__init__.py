from staytime_lab.models.heads import (
    HEAD_KINDS,
    DurationBuckets,
    HeadLabels,
    make_head,
    ndt_value,
)
from staytime_lab.models.estimator import StaytimeModel

__all__ = [
    "DurationBuckets",
    "HEAD_KINDS",
    "HeadLabels",
    "StaytimeModel",
    "make_head",
    "ndt_value",
]
