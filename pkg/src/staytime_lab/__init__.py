"""Staytime laboratory: comment-section staytime prediction models and evaluation."""

from staytime_lab.records import (
    CommentIndex,
    CommentInteraction,
    CommentRecord,
    Dataset,
    ImpressionRecord,
    SampledComments,
    UserHistory,
    UserRecord,
    ValidationReport,
    VideoRecord,
    build_comment_index,
    sample_comments,
    validate_dataset,
)
from staytime_lab.embeddings import EmbeddingTable, read_embedding_table, write_embedding_table
from staytime_lab.models.estimator import StaytimeModel

__version__ = "0.1.0"

__all__ = [
    "CommentIndex",
    "CommentInteraction",
    "CommentRecord",
    "Dataset",
    "EmbeddingTable",
    "ImpressionRecord",
    "SampledComments",
    "StaytimeModel",
    "UserHistory",
    "UserRecord",
    "ValidationReport",
    "VideoRecord",
    "build_comment_index",
    "read_embedding_table",
    "sample_comments",
    "validate_dataset",
    "write_embedding_table",
    "__version__",
]
