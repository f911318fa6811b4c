"""Exception hierarchy; the CLI maps each class to an exit code"""


class IsoblockError(Exception):
    """Base class for all isoblock errors"""

    exit_code = 3


class ConfigError(IsoblockError):
    """Invalid, missing or inconsistent configuration"""

    exit_code = 2


class NumericalError(IsoblockError):
    """Step-size violations, non-convergent iterations, too-short data"""

    exit_code = 3


class DimensionError(IsoblockError, ValueError):
    """Vectors of different dimension were combined"""

    exit_code = 3


class PreconditionError(IsoblockError, ValueError):
    """An operation was called outside its domain"""

    exit_code = 3


class BlockConstructionError(IsoblockError):
    """No isolating block could be built from the given neighborhood"""

    exit_code = 4


class SuiteMismatchError(IsoblockError):
    """A verification suite does not apply to the configured model"""

    exit_code = 5
