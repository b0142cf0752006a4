"""Shared exception types."""


class DataError(Exception):
    """Malformed or inconsistent input data (bad file, schema violation, ...)."""


class UsageError(Exception):
    """Bad command-line usage."""
