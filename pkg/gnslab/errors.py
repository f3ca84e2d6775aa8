"""Exceptions and warnings raised by gnslab."""


class DomainError(ValueError):
    """An input lies outside the domain where a quantity is defined.

    Raised for invalid exponents, non-positive Gamma arguments, incompatible grids
    and transforms, and malformed command line parameters.
    """


class StepFailure(RuntimeError):
    """Time stepping broke down.

    Args:
        message: Human readable reason.
        trace: The partial trace recorded before the failure. Defaults to None.
    """

    def __init__(self, message: str, trace=None) -> None:
        super().__init__(message)
        self.trace = trace


class ConvergenceWarning(UserWarning):
    """An iterative solver stopped at its iteration cap."""
