"""Exception types shared across the package."""


class FormatError(ValueError):
    """An on-disk artifact does not match its documented layout."""


class TrainingDivergedError(RuntimeError):
    """A training loss became non-finite; the run was aborted."""
