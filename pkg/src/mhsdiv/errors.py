from .exact import PrecisionUnderflow


class BudgetExceeded(RuntimeError):
    """A requested computation is larger than the configured budget."""

    def __init__(self, message: str, cost: int | None = None):
        super().__init__(message)
        self.cost = cost


class InconsistencyError(RuntimeError):
    """Two routes that must agree did not; a library bug or a notable mathematical event."""


class NotApplicable(ValueError):
    """The hypotheses of a theorem being checked do not hold for these inputs."""


__all__ = ["BudgetExceeded", "InconsistencyError", "NotApplicable", "PrecisionUnderflow"]
