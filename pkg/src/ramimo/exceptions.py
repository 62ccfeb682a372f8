"""Exception types raised by ramimo."""


class ContractViolation(ValueError):
    """An input does not satisfy the documented precondition of an operation."""


class SingularMatrixError(ContractViolation):
    """A linear system is singular to working precision.

    Attributes
    ----------
    condition : float
        2-norm condition number estimate of the offending matrix.
    """

    def __init__(self, message, condition):
        super().__init__(f"{message} (condition number ~ {condition:.3e})")
        self.condition = condition


class InfeasibleError(ValueError):
    """Block diagonalization has no null space of the required dimension."""

    def __init__(self, message, user=None):
        super().__init__(message)
        self.user = user


class BudgetExceededError(ValueError):
    """An exhaustive search would exceed its configured evaluation budget."""


class ConfigError(ValueError):
    """Invalid experiment or system configuration."""
