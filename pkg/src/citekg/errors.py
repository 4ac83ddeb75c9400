"""Exception taxonomy shared by the library and the CLI.

Exit codes: 1 internal, 2 usage/input, 3 numeric divergence, 4 contract
violation.
"""


class CiteKGError(Exception):
    exit_code = 1


class ParseError(CiteKGError):
    """Malformed input row. Carries source position when known."""

    exit_code = 2

    def __init__(self, message, path=None, line=None):
        if path is not None:
            where = f"{path}:{line}" if line is not None else str(path)
            message = f"{where}: {message}"
        super().__init__(message)
        self.path = path
        self.line = line


class SchemaError(CiteKGError):
    """Entity/relation data violates the graph schema (e.g. class conflict)."""

    exit_code = 2


class ConfigError(CiteKGError):
    """Invalid configuration/arguments for an operation."""

    exit_code = 2


class StrategyError(ConfigError):
    """A negative-sampling strategy has an empty candidate pool."""


class NumericError(CiteKGError):
    """Non-finite value in a numeric computation."""

    exit_code = 3


class ContractError(CiteKGError):
    """A documented API precondition was violated by the caller."""

    exit_code = 4
