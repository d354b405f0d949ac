"""Exception types shared across the package."""


class AlignBenchError(Exception):
    """Base class for all package errors."""


class DimensionError(AlignBenchError, ValueError):
    """Operand shapes are incompatible."""


class ContractError(AlignBenchError, ValueError):
    """A precondition of an operation was violated."""


class UnsupportedCombinationError(AlignBenchError, ValueError):
    """An alignment kind was used with a mechanism that does not support it."""


class ConfigError(AlignBenchError, ValueError):
    """A grid configuration is invalid."""
