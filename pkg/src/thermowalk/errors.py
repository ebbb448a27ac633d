"""Exception types shared across the package."""


class ThermowalkError(Exception):
    """Base class for all package errors."""


class ConfigError(ThermowalkError, ValueError):
    """Invalid user input: bad sizes, missing keys, incompatible grids."""


class NumericalError(ThermowalkError, ArithmeticError):
    """Non-finite values, lost positivity, non-convergence or runaway step counts."""


class DomainError(NumericalError):
    """An argument lies outside the domain of a physical formula (T <= 0, S = 0, ...)."""


class UnsupportedCaseError(ThermowalkError):
    """The requested closed form does not exist for the given inputs."""
