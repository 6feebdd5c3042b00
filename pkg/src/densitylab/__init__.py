"""densitylab: densities of computable sets, permutations that move them,
pseudo-random surrogate experiments and generic-case descriptions."""

__version__ = "0.1.0"

from .construct import build_prescribed_density
from .density import (
    density_profile,
    estimate_limits,
    geometric_schedule,
    partial_density,
    principal_function,
)
from .errors import (
    ConstructionBugError,
    DecisionTimeout,
    DensityLabError,
    HorizonError,
    InjectivityError,
    InsufficientMembersError,
    ParameterError,
    PermutationIntegrityError,
)
from .permute import image_set, injection_to_permutation, orbit_permutation
from .seqcore import BitSequence, combine, prefix, prng_sequence, standard_set

__all__ = [
    "BitSequence", "ConstructionBugError", "DecisionTimeout", "DensityLabError",
    "HorizonError", "InjectivityError", "InsufficientMembersError", "ParameterError",
    "PermutationIntegrityError", "build_prescribed_density", "combine", "density_profile",
    "estimate_limits", "geometric_schedule", "image_set", "injection_to_permutation",
    "orbit_permutation", "partial_density", "prefix", "principal_function",
    "prng_sequence", "standard_set",
]
