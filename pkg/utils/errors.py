"""
Exception hierarchy shared by the utilities, agents and coordinator.
"""


class DCSError(Exception):
    """Base class for every error raised by the workbench"""


class DimensionMismatchError(DCSError):
    """Shapes of ensembles, location matrices or measurement sets disagree"""


class InvalidSensorError(DCSError):
    """A sensor index outside {1, ..., J}"""


class InfeasibleModelError(DCSError):
    """No enumerated location matrix within the caps explains the ensemble"""


class PreconditionError(DCSError):
    """An operation was called outside its precondition"""


class GuardExceededError(DCSError):
    """Exhaustive search refused because the instance is too large"""


class ConfigError(DCSError):
    """Invalid environment settings or experiment configuration"""


class OutputError(DCSError):
    """Writing or reading a result file failed"""


class InvariantViolationError(DCSError):
    """An internally asserted invariant did not hold"""


class RecoveryGuaranteeError(DCSError):
    """A trial contradicted one of the recovery guarantees during an assertion run"""
