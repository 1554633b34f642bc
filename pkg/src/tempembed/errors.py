"""Exception hierarchy. The CLI maps each class to an exit status."""


class TempEmbedError(Exception):
    exit_code = 2


class DataError(TempEmbedError, ValueError):
    """Input data is unusable (empty, degenerate split, infeasible sample)."""

    exit_code = 2


class ParseError(DataError):
    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class ConfigError(TempEmbedError, ValueError):
    exit_code = 1


class NumericalError(TempEmbedError, ArithmeticError):
    exit_code = 3
