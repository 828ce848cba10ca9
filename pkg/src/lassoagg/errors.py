class InvalidInputError(ValueError):
    """Raised when inputs violate a documented precondition."""


class DegenerateVarianceError(RuntimeError):
    """Raised when the square-root Lasso residual collapses and no
    meaningful variance estimate exists (interpolation regime)."""
