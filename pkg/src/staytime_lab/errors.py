"""Exception types shared across the package."""


class StaytimeLabError(Exception):
    """Base class for all package errors."""


class ConfigError(StaytimeLabError):
    """A configuration object violates its invariants."""


class DataValidationError(StaytimeLabError):
    """A record or file violates the canonical schema."""


class ShapeError(StaytimeLabError):
    """Incompatible array shapes fed to a layer or loss."""


class MaskError(StaytimeLabError):
    """A mask leaves no real element where at least one is required."""


class EmbeddingFormatError(StaytimeLabError):
    """Malformed embedding-table file; carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class CheckpointFormatError(StaytimeLabError):
    """Malformed parameter-checkpoint file."""


class UnsupportedPredictionError(StaytimeLabError):
    """The requested prediction kind is undefined for this model."""


class FitError(StaytimeLabError):
    """Model fitting could not proceed (degenerate data, empty bucket, ...)."""


class NotFittedError(StaytimeLabError):
    """predict was called before fit."""
