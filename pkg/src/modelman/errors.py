"""Exception hierarchy shared by every module."""


class ModelmanError(Exception):
    """Base class for all errors raised by modelman."""


class ParameterDomainError(ModelmanError, ValueError):
    """A parameter lies outside the domain of the operation."""


class InputError(ModelmanError, ValueError):
    """Input data violates a documented precondition."""


class PolicyError(ModelmanError, ValueError):
    """A numerical policy cannot be honoured for the given input."""


class NumericError(ModelmanError, ArithmeticError):
    """A computation produced a non-finite value."""

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class VerificationError(ModelmanError, AssertionError):
    """A post-construction check failed."""
