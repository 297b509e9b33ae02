class DGMError(Exception):
    """Base class for all package errors."""


class ParseError(DGMError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(DGMError):
    pass


class ModelError(DGMError):
    pass


class DGMWarning(UserWarning):
    """Recoverable condition (empty candidate set, isolated entity, ...)."""
