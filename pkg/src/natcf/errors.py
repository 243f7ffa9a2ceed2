"""Exception hierarchy shared across the package."""


class NatcfError(Exception):
    """Base class for all package errors."""


class CycleDetected(NatcfError):
    """The declared edges contain a directed cycle."""

    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("cycle detected: " + " -> ".join(self.cycle))


class UnknownVariable(NatcfError):
    pass


class UnknownParent(NatcfError):
    pass


class ParseError(NatcfError):
    """Expression or spec-file syntax error, with a location."""

    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class NonMonotoneNoise(NatcfError):
    """Noise enters a mechanism non-additively or with a non-positive scale."""


class ArityMismatch(NatcfError):
    pass


class UnsupportedMeasure(NatcfError):
    pass


class ConstantMechanism(NatcfError):
    """Operation undefined on an intervened (constant) mechanism."""


class MissingNoise(NatcfError):
    pass


class MissingValue(NatcfError):
    pass


class MissingVariable(NatcfError):
    pass


class ZeroStd(NatcfError):
    pass


class RejectionBudgetExceeded(NatcfError):
    """Rejection sampler hit its draw cap; evidence sits in a near-zero-density region."""


class TooManyDimensions(NatcfError):
    pass


class NotFeasible(NatcfError):
    pass


class InvalidConfig(NatcfError):
    pass


class RankDeficient(NatcfError):
    pass


class InsufficientData(NatcfError):
    pass


class GraphMismatch(NatcfError):
    pass


class DataError(NatcfError):
    """Malformed dataset or spec file contents."""
