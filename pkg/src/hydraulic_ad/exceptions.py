"""Exception types raised across the package."""


class DataError(ValueError):
    """Input data violates a value-level contract (non-finite, bad code, ...)."""


class FormatError(DataError):
    """A dataset or model file does not match its documented layout."""


class TrainingError(RuntimeError):
    """An iterative fit diverged or failed to converge."""
