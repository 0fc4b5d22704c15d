"""Exception types raised across the package."""


class TcpksError(Exception):
    """Base class for all package errors."""


class DomainError(TcpksError, ValueError):
    """An argument lies outside the physical domain (r < 1, R <= 1, ...)."""


class BadDomain(DomainError):
    pass


class TooFewPoints(TcpksError, ValueError):
    pass


class ResolutionTooLow(TcpksError, ValueError):
    pass


class SingularSystem(TcpksError, ArithmeticError):
    pass


class InconsistentState(TcpksError, RuntimeError):
    """The derived fields c, phi do not match the evolved fields n, w."""


class BadCenter(TcpksError, ValueError):
    pass


class NonPositiveValues(TcpksError, ValueError):
    pass


class InsufficientData(TcpksError, ValueError):
    pass


class ConfigError(TcpksError, ValueError):
    """Base for configuration problems; carries an optional line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownKey(ConfigError):
    pass


class BadValue(ConfigError):
    pass


class MissingRequired(ConfigError):
    pass


class CheckpointError(TcpksError, IOError):
    pass
