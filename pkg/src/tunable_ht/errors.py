"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class ResourceError(RuntimeError):
    """Requested exact computation exceeds the configured enumeration cap."""

    def __init__(self, message: str, count: int | None = None):
        super().__init__(message)
        self.count = count


class NumericError(ArithmeticError):
    """An iterative numerical routine failed to converge."""

    def __init__(self, message: str, state: dict | None = None):
        super().__init__(message)
        self.state = dict(state or {})


class OracleMismatch(AssertionError):
    """A closed-form result disagreed with its brute-force oracle."""
