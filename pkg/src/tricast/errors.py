"""Exception types shared across the library."""


class ShapeError(ValueError):
    """Operands have incompatible shapes for the requested operation."""


class ConfigError(ValueError):
    """A configuration value violates its constraints."""


class DataError(ValueError):
    """Input data is malformed (bad CSV cell, empty split, constant variable)."""


class StateError(RuntimeError):
    """An object was used in an invalid state (e.g. backward on a consumed graph)."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values."""
