"""Exception types shared across the package."""


class FieldFormatError(ValueError):
    """Raised for an empty or malformed field image."""


class ParameterError(ValueError):
    """Raised when a generator or operation parameter is out of its domain."""


class ConfigError(ValueError):
    """Raised for invalid, unknown, or out-of-range configuration keys."""


class PlacementError(RuntimeError):
    """Raised when random placement cannot fit all bodies into the arena."""
