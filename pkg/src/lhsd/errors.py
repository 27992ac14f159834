"""Exception types shared across the package."""


class LHSDError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(LHSDError, ValueError):
    """An argument lies outside the domain of an operation."""


class CapacityError(LHSDError):
    """A dense path was requested above the configured size limit."""


class NumericError(LHSDError, ArithmeticError):
    """Non-finite values or a failed iteration."""


class ConfigError(LHSDError):
    """Invalid experiment configuration."""
