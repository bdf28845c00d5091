"""Exception hierarchy shared by every spinrecon module."""


class SpinReconError(ValueError):
    """Base class for all validation failures raised by the library."""


class InvalidDirection(SpinReconError):
    pass


class InvalidSampleGrid(SpinReconError):
    pass


class InvalidPhases(SpinReconError):
    pass


class SpinMismatch(SpinReconError):
    pass


class ZeroState(SpinReconError):
    pass


class EmptyRecombination(SpinReconError):
    pass


class DimensionTooLarge(SpinReconError):
    pass


class InvalidArity(SpinReconError):
    pass


class OrthogonalToSymmetric(SpinReconError):
    pass


class CoplanarAxes(SpinReconError):
    pass


class InvalidShotCount(SpinReconError):
    pass


class OracleTooExpensive(SpinReconError):
    pass
