"""Exceptions shared across modules."""


class BudgetExceeded(RuntimeError):
    """An operation would exceed its work budget."""

    def __init__(self, message: str, parameter: str = "budget"):
        super().__init__(message)
        self.parameter = parameter


class CapExceeded(RuntimeError):
    """A full scan was refused because p is above the configured cap."""

    def __init__(self, message: str, parameter: str = "p"):
        super().__init__(message)
        self.parameter = parameter


class ModulusMismatch(ValueError):
    pass


class VerificationFailure(RuntimeError):
    """A result that must hold by construction failed its re-check."""
