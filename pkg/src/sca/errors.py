"""Shared exception types."""


class ConfigurationError(ValueError):
    """An invalid configuration or input-contract violation (CLI exit 2)."""
