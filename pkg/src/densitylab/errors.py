"""Exception hierarchy shared across the package."""


class DensityLabError(Exception):
    """Base class for all errors raised by densitylab."""


class ParameterError(DensityLabError, ValueError):
    """Invalid argument or token."""


class HorizonError(DensityLabError, IndexError):
    """Evaluation requested beyond a sequence's stored horizon."""


class InsufficientMembersError(DensityLabError):
    """A search ran out of horizon before finding enough members."""

    def __init__(self, message, achieved=0):
        super().__init__(message)
        self.achieved = achieved


class InjectivityError(DensityLabError):
    """A supposed injection repeated a value."""


class PermutationIntegrityError(DensityLabError):
    """Forward and inverse maps of a permutation disagree."""


class ConstructionBugError(DensityLabError, AssertionError):
    """A bound that is a theorem failed; the construction is wrong."""


class DecisionTimeout(DensityLabError):
    """A dovetailed search exhausted its budget schedule."""
