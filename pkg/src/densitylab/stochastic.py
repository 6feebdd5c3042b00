"""Selection rules and density laws checked on pseudo-random surrogates.

Everything here runs on seeded PRNG sequences standing in for random sets;
see :data:`densitylab.seqcore.SURROGATE_NOTE`.  Results are finite-horizon
evidence and are labelled as such in reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .density import (
    DensityProfile,
    PartialDensity,
    count_members,
    density_profile,
    geometric_schedule,
    next_member,
)
from .errors import InsufficientMembersError, ParameterError
from .seqcore import SURROGATE_NOTE, BitSequence, intersect_all, prng_sequence

_BLOCK = 1 << 16


class Observed:
    """Read-only view of the bits a rule has seen so far.

    The driver appends bit ``n`` only after the rule has decided on
    position ``n``, so a rule cannot peek at what it is about to select.
    """

    __slots__ = ("_bits",)

    def __init__(self, bits: list):
        self._bits = bits

    def __len__(self):
        return len(self._bits)

    def __getitem__(self, i):
        return self._bits[i]

    @property
    def position(self) -> int:
        """Index of the position being decided."""
        return len(self._bits)


@dataclass(frozen=True)
class MonotoneSelectionRule:
    decide: Callable[[Observed], bool]
    label: str


def select_all() -> MonotoneSelectionRule:
    return MonotoneSelectionRule(lambda seen: True, "all")


def select_after_one() -> MonotoneSelectionRule:
    """Select position n when bit n-1 was a 1."""
    return MonotoneSelectionRule(lambda seen: len(seen) > 0 and seen[len(seen) - 1] == 1,
                                 "after-one")


def oblivious_rule(places: BitSequence) -> MonotoneSelectionRule:
    """Select position n iff ``n`` is in ``places``; ignores the observed bits."""
    cache = {}

    def decide(seen):
        n = seen.position
        blk, off = divmod(n, _BLOCK)
        bits = cache.get(blk)
        if bits is None:
            cache.clear()
            bits = cache[blk] = places.block(blk * _BLOCK, (blk + 1) * _BLOCK).tolist()
        return bits[off] == 1

    return MonotoneSelectionRule(decide, f"in:{places.label}")


@dataclass(frozen=True)
class SelectionReport:
    label: str
    horizon: int
    selected: int
    ones: int

    @property
    def zero_selection(self) -> bool:
        return self.selected == 0

    @property
    def bias(self) -> Optional[Fraction]:
        """Frequency of ones among selected places; ``None`` if nothing was selected."""
        if self.selected == 0:
            return None
        return Fraction(self.ones, self.selected)

    def tolerance(self, sigmas: float = 4.0) -> Optional[float]:
        if self.selected == 0:
            return None
        return sigmas / math.sqrt(self.selected)

    def unbiased(self, target=Fraction(1, 2), sigmas: float = 4.0) -> Optional[bool]:
        if self.selected == 0:
            return None
        return abs(float(self.bias - target)) <= self.tolerance(sigmas)


def select_trace(rule: MonotoneSelectionRule, s: BitSequence,
                 checkpoints: Sequence[int]) -> List[SelectionReport]:
    """Walk ``s`` once, reporting the selection counts at each checkpoint."""
    checkpoints = [int(c) for c in checkpoints]
    if not checkpoints or checkpoints[0] < 1:
        raise ParameterError("checkpoints must be >= 1")
    if any(b <= a for a, b in zip(checkpoints, checkpoints[1:])):
        raise ParameterError("checkpoints must be strictly increasing")
    horizon = checkpoints[-1]
    seen: list = []
    view = Observed(seen)
    decide = rule.decide
    selected = ones = 0
    out = []
    marks = iter(checkpoints)
    mark = next(marks)
    for start in range(0, horizon, _BLOCK):
        for b in s.block(start, min(horizon, start + _BLOCK)).tolist():
            if decide(view):
                selected += 1
                ones += b
            seen.append(b)
            if len(seen) == mark:
                out.append(SelectionReport(rule.label, mark, selected, ones))
                mark = next(marks, None)
    return out


def select(rule: MonotoneSelectionRule, s: BitSequence, horizon: int) -> SelectionReport:
    if horizon < 1:
        raise ParameterError("horizon must be >= 1")
    return select_trace(rule, s, [horizon])[0]


# -- thinning -----------------------------------------------------------------

@dataclass(frozen=True)
class ThinningCheckpoint:
    n: int
    count_a: int  # |A | n|
    count_ab: int  # |(A & B) | n|, counted directly
    selection: SelectionReport  # rule "if n in A, select B(n)" walked over B

    @property
    def factorization_holds(self) -> bool:
        """``rho_n(A&B) == rho_n(A) * bias`` exactly."""
        sel = self.selection
        if sel.selected != self.count_a:
            return False
        if sel.selected == 0:
            return self.count_ab == 0
        return Fraction(self.count_ab, self.n) == Fraction(self.count_a, self.n) * sel.bias


@dataclass(frozen=True)
class ThinningResult:
    seed: int
    horizon: int
    rho_a: PartialDensity
    rho_ab: PartialDensity
    checkpoints: List[ThinningCheckpoint]
    note: str = SURROGATE_NOTE

    @property
    def ratio(self) -> Optional[Fraction]:
        if self.rho_a.count == 0:
            return None
        return Fraction(self.rho_ab.count, self.rho_a.count)

    @property
    def bias(self) -> Optional[Fraction]:
        return self.checkpoints[-1].selection.bias


def thinning_experiment(a: BitSequence, seed: int, horizon: int,
                        checkpoints: Optional[Sequence[int]] = None) -> ThinningResult:
    """Intersect ``a`` with a PRNG set and measure how much survives.

    ``rho(A&B)`` is counted directly; independently, the selection rule
    "if n in A, select B(n)" is walked over B.  Their product identity is
    recorded per checkpoint.
    """
    if horizon < 1000:
        raise ParameterError("thinning horizon must be >= 1000")
    b = prng_sequence(seed)
    marks = list(checkpoints) if checkpoints is not None else geometric_schedule(horizon, 2)
    if marks[-1] != horizon:
        raise ParameterError("last checkpoint must equal the horizon")
    walk = select_trace(oblivious_rule(a), b, marks)
    both = intersect_all([a, b])
    pa = density_profile(a, marks)
    pab = density_profile(both, marks)
    cps = [ThinningCheckpoint(n, va.count, vab.count, rep)
           for n, va, vab, rep in zip(marks, pa.values, pab.values, walk)]
    return ThinningResult(seed, horizon, pa.values[-1], pab.values[-1], cps)


# -- k-fold intersections ---------------------------------------------------

@dataclass(frozen=True)
class IntersectionResult:
    seeds: Tuple[int, ...]
    density: PartialDensity
    note: str = SURROGATE_NOTE

    @property
    def k(self) -> int:
        return len(self.seeds)

    @property
    def target(self) -> Fraction:
        return Fraction(1, 2 ** self.k)

    @property
    def deviation(self) -> float:
        return float(self.density.value - self.target)


def intersection_density(seqs: Sequence[BitSequence], horizon: int) -> PartialDensity:
    return PartialDensity(count_members(intersect_all(seqs), horizon), horizon)


def mutual_intersection_experiment(k: int, seeds: Sequence[int], horizon: int) -> IntersectionResult:
    seeds = tuple(int(x) for x in seeds)
    if k < 1 or len(seeds) != k:
        raise ParameterError(f"need exactly k={k} >= 1 seeds, got {len(seeds)}")
    if len(set(seeds)) != k:
        raise ParameterError("seeds must be distinct")
    if horizon < 1:
        raise ParameterError("horizon must be >= 1")
    pd = intersection_density([prng_sequence(x) for x in seeds], horizon)
    return IntersectionResult(seeds, pd)


# -- nested construction -----------------------------------------------------

def _level_vector(randoms, bounds, j):
    # A_j(n) = R_0(n) and, for 1 <= i <= j, (n < k_{i-1} or R_i(n))
    def vec(idx):
        out = randoms[0].at(idx).astype(bool)
        for i in range(1, j + 1):
            out &= (idx < bounds[i - 1]) | randoms[i].at(idx).astype(bool)
        return out

    return vec


def _level(randoms, bounds, j, label):
    vec = _level_vector(randoms, bounds, j)
    return BitSequence(lambda n: int(vec(np.array([n], dtype=np.int64))[0]),
                       kind="derived", label=label, vector=vec)


@dataclass(frozen=True)
class NestedResult:
    seeds: Tuple[int, ...]
    intervals: List[Tuple[int, int]]  # [k_{j-1}, k_j) for j = 0..J, with k_{-1} = 0
    levels: List[BitSequence]  # A_0 .. A_J
    final_set: BitSequence
    profile: DensityProfile
    note: str = SURROGATE_NOTE


def nested_construction(seeds: Sequence[int], horizon: int) -> NestedResult:
    """Shrink a PRNG set level by level while pinning one member per interval.

    ``A_0 = R_0`` and ``A_{j+1} = A_j & ([0, k_j) | R_{j+1})``.  Each bound
    ``k_j`` is found by search: one past the first member of ``A_j`` at or
    above ``k_{j-1}``.  The intervals ``[k_{j-1}, k_j)`` form a strong array
    meeting the final set.
    """
    seeds = tuple(int(x) for x in seeds)
    if len(seeds) < 2:
        raise ParameterError("need J+1 >= 2 seeds")
    if len(set(seeds)) != len(seeds):
        raise ParameterError("seeds must be distinct")
    randoms = [prng_sequence(x) for x in seeds]
    bounds: List[int] = []
    levels = []
    lo = 0
    for j in range(len(seeds)):
        level = _level(randoms, bounds, j, f"A_{j}")
        m = next_member(level, lo, horizon)
        if m is None:
            raise InsufficientMembersError(
                f"no member of A_{j} in [{lo}, {horizon}); last completed level {j - 1}",
                achieved=j - 1)
        bounds.append(m + 1)
        levels.append(level)
        lo = m + 1
    intervals = list(zip([0] + bounds[:-1], bounds))
    final = levels[-1]._relabel(f"nested:{','.join(map(str, seeds))}")
    profile = density_profile(final, geometric_schedule(horizon, 2))
    return NestedResult(seeds, intervals, levels, final, profile)
