"""Exception types shared across the package."""


class InsufficientDataError(ValueError):
    """A dataset cannot support the requested operation (too few states or samples)."""


class IdxFormatError(ValueError):
    """An IDX file is malformed: wrong magic number or truncated payload."""


class DatasetConsistencyError(ValueError):
    """Paired data files disagree, e.g. image and label counts differ."""


class UnsupportedOperationError(RuntimeError):
    """The model lacks what the operation needs, e.g. Mahalanobis without covariances."""


class UnsupportedDimensionError(ValueError):
    """The operation only works for a specific embedding dimensionality."""


class TrainingDivergedError(RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"training diverged at step {step}: non-finite loss")
