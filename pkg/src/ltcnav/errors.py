"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """Raised when inputs break a documented shape or value contract."""


class ConfigurationError(ValueError):
    """Raised for invalid or infeasible configuration values."""


class UnsupportedArchitecture(ValueError):
    """Raised when an operation is requested for a cell kind that lacks it."""


class NumericalDivergence(FloatingPointError):
    """Raised when a solver step produces NaN or Inf."""

    def __init__(self, message: str, step_index: int | None = None):
        super().__init__(message)
        self.step_index = step_index
