"""Exception hierarchy shared across the package."""


class FusionLocError(Exception):
    """Base class for all package errors."""


class InvalidInputError(FusionLocError, ValueError):
    """Non-finite or otherwise unusable numeric input."""


class DegenerateOrientationError(InvalidInputError):
    """Heading vector too close to zero to define an angle."""


class DegenerateInputError(InvalidInputError):
    """Empty or otherwise degenerate data (e.g. a scan with no points)."""


class ConfigError(FusionLocError, ValueError):
    """Invalid configuration value or combination."""


class DatasetFormatError(FusionLocError):
    """Malformed or missing dataset file."""

    def __init__(self, message, frame=None):
        super().__init__(message)
        self.frame = frame


class ConsistencyError(DatasetFormatError):
    """Dataset files disagree with each other (counts, indices)."""


class GenerationError(FusionLocError):
    """Synthetic world generation failed after bounded retries."""


class InvalidPoseError(FusionLocError, ValueError):
    """Pose lies outside free space."""


class DivergenceError(FusionLocError, ArithmeticError):
    """Training produced a non-finite loss."""
