"""Exception types shared across the package."""


class NtlError(Exception):
    """Base class for every error raised by ntlgen."""


class ConfigError(NtlError, ValueError):
    """Invalid configuration or arguments."""


class ShapeError(NtlError, ValueError):
    """Tensor or raster shapes are incompatible."""


class NumericError(NtlError, ArithmeticError):
    """Non-finite values where finite ones are required."""


class DegenerateBatchError(NtlError, ValueError):
    """Batch statistics are undefined (a single element per channel)."""


class DegenerateImageError(NtlError, ValueError):
    """An image has zero variance where a correlation is requested."""


class DataError(NtlError, ValueError):
    """Input data is missing, inconsistent or out of domain."""


class FormatError(NtlError, ValueError):
    """An on-disk file does not match its declared format."""


class TrainingDivergedError(NtlError, ArithmeticError):
    """A loss became non-finite during training."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"training diverged at step {step}")
