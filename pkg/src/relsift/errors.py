"""Exception hierarchy shared across the toolkit.

``DataError`` marks problems with user-supplied data (bad records, degenerate
inputs); the CLI maps it to exit code 2. ``UsageError`` marks bad invocations
and maps to exit code 1.
"""


class DataError(ValueError):
    """Invalid or degenerate input data."""


class UsageError(ValueError):
    """Invalid invocation (bad flag combination, missing argument)."""
