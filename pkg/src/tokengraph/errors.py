"""Exception taxonomy shared across the package.

The CLI maps ValidationError to exit code 1 and every other
TokenGraphError (format corruption, numerical blow-ups) to exit code 2.
"""


class TokenGraphError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(TokenGraphError):
    """Bad user input: malformed arguments, files, or dataset contents."""


class ShardFormatError(TokenGraphError):
    """A binary shard or checkpoint file is corrupt or has the wrong layout."""


class NonFiniteError(TokenGraphError):
    """NaN or infinity encountered where finite values are required."""
