"""Exception and warning types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the domain of an operation."""


class NumericalError(ArithmeticError):
    """A numerical procedure failed to reach the required accuracy."""


class ConvergenceWarning(UserWarning):
    """A discretized result changed noticeably under grid refinement."""
