"""Exception types shared across the package."""


class DimensionMismatchError(ValueError):
    """Operands have incompatible dimensions."""


class EmptyCollectionError(ValueError):
    """An operation requiring a nonempty collection received an empty one."""


class NetworkFormatError(ValueError):
    """A weight file or layer description is malformed."""


class DimensionChainError(NetworkFormatError):
    """Consecutive layer shapes do not chain."""


class EmptyNetworkError(NetworkFormatError):
    """A network must contain at least one layer."""


class NonFiniteWeightError(NetworkFormatError):
    """Weights and biases must be finite."""


class LpSolverError(RuntimeError):
    """The LP backend failed numerically (never silently returns a wrong optimum)."""


class UndefinedMetricError(ValueError):
    """The approximation-error metric is undefined (reference area is not positive)."""


class EmptySweepError(ValueError):
    """A sweep needs at least one partitioning configuration."""


class ConfigError(ValueError):
    """An experiment configuration file is invalid or inconsistent."""
