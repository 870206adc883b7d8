"""Exception hierarchy shared by all salkit modules.

The CLI maps these onto stable exit codes: usage, contract and parse
failures exit with 2, numerical failures with 3.
"""


class SalkitError(Exception):
    """Base class for all salkit errors."""


class DataError(SalkitError):
    """Input data violates a basic validity requirement (NaN, inf, bad shape)."""


class ContractError(SalkitError):
    """A documented precondition of an operation was violated by the caller."""


class NumericError(SalkitError):
    """A numerical routine failed (no convergence, divergence, NaN loss)."""


class ParseError(SalkitError):
    """A text input could not be parsed. Carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class LoadError(SalkitError):
    """A serialized model file is missing, truncated, or inconsistent."""


class MetricUndefinedError(SalkitError):
    """A metric has no defined value on the given inputs (e.g. empty group)."""


class UnknownTokenError(SalkitError, KeyError):
    """A requested token is not present in the vocabulary."""

    def __str__(self) -> str:  # KeyError quotes its payload; keep the message plain
        return Exception.__str__(self)
