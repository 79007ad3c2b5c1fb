"""Exception hierarchy shared across the package.

CLI exit codes map onto this hierarchy: ConfigError -> 2, DataError -> 3,
DivergenceError -> 4.
"""


class PipelineError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(PipelineError):
    """Invalid or incomplete configuration; names the offending key."""

    def __init__(self, key, message=None):
        self.key = key
        super().__init__(message or f"config error: {key}")


class DataError(PipelineError):
    """Problems with input data: bad files, bad shapes, bad ranges."""


class FormatError(DataError):
    """File does not match the expected container format."""


class CorruptionError(DataError):
    """Container header and payload disagree."""


class RangeError(DataError, ValueError):
    """Argument outside its valid range (bad band, bad window, k too large)."""


class ShapeError(DataError, ValueError):
    """Mismatched dimensions between related inputs."""


class EmptyInputError(DataError, ValueError):
    """Operation received no data to work on."""


class DegenerateInputError(DataError, ValueError):
    """Input is formally valid but numerically unusable (e.g. zero variance)."""


class StratificationError(DataError):
    """A cross-validation fold cannot contain every class."""


class DivergenceError(PipelineError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, message=None):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")
