"""Exception hierarchy shared by all modules.

The CLI maps these onto process exit codes, so every failure a user can
trigger should surface as one of them.
"""


class OneBitError(Exception):
    """Base class for all package errors."""


class ConfigurationError(OneBitError, ValueError):
    """Invalid dimensions, options or experiment configuration."""


class DomainError(OneBitError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NumericalFailure(OneBitError, ArithmeticError):
    """A numerical routine diverged or failed to converge.

    Attributes:
        trace: optional diagnostic payload (e.g. the loss trace so far).
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class OracleScaleError(OneBitError, ValueError):
    """A brute-force oracle was asked to run beyond its desk-scale limits."""
