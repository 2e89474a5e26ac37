"""Exception types raised by the toolkit."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class ConfigurationError(ValueError):
    """Inconsistent discretisation or run configuration."""


class ConstructionError(ArithmeticError):
    """An operator could not be assembled (duplicate nodes, overflow)."""


class NumericalDegeneracyError(ArithmeticError):
    """A quantity needed for a division is numerically zero."""


class ClassificationError(RuntimeError):
    """No turning point could be located on the grid span."""
