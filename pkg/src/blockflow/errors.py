"""Exception types shared across the package."""


class Error(Exception):
    """Base class for all blockflow errors."""


class FormatError(Error):
    """Malformed or corrupt on-disk data: edge files, manifests, vectors."""


class ConfigError(Error):
    """Invalid configuration or an incompatible program/graph combination."""


class ResourceError(Error):
    """A memory or other resource budget would be exceeded."""
