"""Exception types raised across the package."""


class DuodecError(Exception):
    pass


class DimensionError(DuodecError, ValueError):
    """Operand shapes do not agree."""


class NumericError(DuodecError, FloatingPointError):
    """A NaN or infinity appeared in a tensor."""


class ConfigError(DuodecError, ValueError):
    pass


class InputError(DuodecError, ValueError):
    pass


class StateError(DuodecError, RuntimeError):
    """Decoder caches are inconsistent with the configuration or schedule."""


class HarnessError(DuodecError, RuntimeError):
    pass
