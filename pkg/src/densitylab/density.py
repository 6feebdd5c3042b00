"""Exact partial densities and principal-function diagnostics.

All counts are integers and all densities are :class:`fractions.Fraction`;
floats appear only when a report is rendered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, NamedTuple, Optional, Sequence

import numpy as np

from .errors import ConstructionBugError, InsufficientMembersError, ParameterError
from .seqcore import BitSequence

CHUNK = 1 << 20
DEFAULT_SEARCH_HORIZON = 1 << 22
DEFAULT_RATIO = Fraction(11, 10)
DEFAULT_TAIL_WINDOW = Fraction(1, 2)


@dataclass(frozen=True)
class PartialDensity:
    count: int
    horizon: int

    def __post_init__(self):
        if self.horizon < 1 or not 0 <= self.count <= self.horizon:
            raise ParameterError(f"invalid partial density {self.count}/{self.horizon}")

    @property
    def value(self) -> Fraction:
        return Fraction(self.count, self.horizon)

    def __float__(self):
        return self.count / self.horizon


@dataclass(frozen=True)
class DensityProfile:
    checkpoints: List[int]
    values: List[PartialDensity]
    tail_window: Fraction = DEFAULT_TAIL_WINDOW

    def __post_init__(self):
        if len(self.checkpoints) != len(self.values):
            raise ParameterError("checkpoints and values differ in length")
        if any(b <= a for a, b in zip(self.checkpoints, self.checkpoints[1:])):
            raise ParameterError("checkpoints must be strictly increasing")
        if not 0 < self.tail_window <= 1:
            raise ParameterError("tail_window must lie in (0, 1]")

    def rows(self):
        for c, v in zip(self.checkpoints, self.values):
            vf = v.value
            yield {"checkpoint": c, "count": v.count,
                   "density_exact_num": vf.numerator, "density_exact_den": vf.denominator,
                   "density_float": float(vf)}


class LimitEstimate(NamedTuple):
    lower_est: Fraction
    upper_est: Fraction


def _spans(start, stop, size=CHUNK):
    while start < stop:
        end = min(stop, start + size)
        yield start, end
        start = end


def count_members(s: BitSequence, stop: int, start: int = 0) -> int:
    """``|S & [start, stop)|``, by closed form when the set has one."""
    if stop <= start:
        return 0
    if s.counter is not None:
        return s.counter(stop) - s.counter(start)
    return sum(int(s.block(a, b).sum(dtype=np.int64)) for a, b in _spans(start, stop))


def next_member(s: BitSequence, start: int, stop: int) -> Optional[int]:
    """Least member in ``[start, stop)``, or ``None``."""
    if s.successor is not None:
        m = s.successor(start)
        return m if m is not None and m < stop else None
    size = 256
    while start < stop:
        end = min(stop, start + size)
        hits = np.flatnonzero(s.block(start, end))
        if hits.size:
            return start + int(hits[0])
        start = end
        size = min(size * 4, CHUNK)
    return None


def partial_density(s: BitSequence, n: int) -> PartialDensity:
    if n < 1:
        raise ParameterError("partial density needs n >= 1")
    return PartialDensity(count_members(s, n), n)


def geometric_schedule(to: int, ratio: Fraction = DEFAULT_RATIO) -> List[int]:
    """Checkpoints ``ceil(ratio^k)`` up to ``to``, always ending at ``to``."""
    ratio = Fraction(ratio)
    if ratio <= 1:
        raise ParameterError("schedule ratio must exceed 1")
    if to < 1:
        raise ParameterError("schedule end must be >= 1")
    out, power = [], Fraction(1)
    while True:
        c = math.ceil(power)
        if c >= to:
            break
        if not out or c > out[-1]:
            out.append(c)
        power *= ratio
    out.append(to)
    return out


def density_profile(s: BitSequence, schedule: Sequence[int],
                    tail_window: Fraction = DEFAULT_TAIL_WINDOW) -> DensityProfile:
    """Partial densities at each checkpoint, in a single pass."""
    schedule = [int(c) for c in schedule]
    if not schedule:
        raise ParameterError("empty schedule")
    if schedule[0] < 1 or any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ParameterError("schedule must be strictly increasing and start at >= 1")
    values, count, prev = [], 0, 0
    for c in schedule:
        count += count_members(s, c, prev)
        values.append(PartialDensity(count, c))
        prev = c
    return DensityProfile(schedule, values, Fraction(tail_window))


def estimate_limits(p: DensityProfile) -> LimitEstimate:
    """Min and max over the last ``tail_window`` fraction of checkpoints.

    These are finite-horizon estimates of the lower and upper density,
    never the limits themselves.
    """
    if len(p.values) < 2:
        raise ParameterError("need at least two checkpoints")
    k = max(1, math.ceil(len(p.values) * p.tail_window))
    tail = [v.value for v in p.values[-k:]]
    return LimitEstimate(min(tail), max(tail))


# -- principal function ------------------------------------------------------

@dataclass(frozen=True)
class PrincipalTable:
    """``p_S(n)`` for ``1 <= n <= len(entries)``; ``entries[n-1] = p_S(n)``."""

    entries: List[int] = field(default_factory=list)

    def __getitem__(self, n: int) -> int:
        if n < 1:
            raise IndexError("principal function is defined for n >= 1")
        return self.entries[n - 1]

    def __len__(self):
        return len(self.entries)


def _short(n):
    # huge horizons are allowed for closed-form sets; keep messages printable
    return str(n) if n.bit_length() <= 64 else f"~2^{n.bit_length() - 1}"


def _first_members(s, how_many, search_horizon):
    found, pos = [], 0
    while len(found) < how_many:
        m = next_member(s, pos, search_horizon)
        if m is None:
            break
        if s.successor is not None:
            found.append(m)
            pos = m + 1
            continue
        # scan a whole chunk at once for non-closed-form sets
        end = min(search_horizon, max(m + 1, pos + CHUNK))
        hits = np.flatnonzero(s.block(m, end)) + m
        found.extend(int(h) for h in hits[: how_many - len(found)])
        pos = end
    return found


def principal_function(s: BitSequence, n_max: int,
                       search_horizon: int = DEFAULT_SEARCH_HORIZON) -> PrincipalTable:
    """Least ``x`` with ``|S | x| >= n``, for ``n = 1 .. n_max``."""
    if n_max < 0:
        raise ParameterError("n_max must be non-negative")
    members = _first_members(s, n_max, search_horizon)
    if len(members) < n_max:
        raise InsufficientMembersError(
            f"{s.label}: only {len(members)} members below {_short(search_horizon)}, "
            f"principal function known up to n={len(members)}",
            achieved=len(members),
        )
    return PrincipalTable([m + 1 for m in members])


def upper_density_checkpoints(s: BitSequence, n_max: int,
                              search_horizon: int = DEFAULT_SEARCH_HORIZON):
    """Pairs ``(n, rho_{p(n)})``; each density equals ``n / p(n)``."""
    table = principal_function(s, n_max, search_horizon)
    if n_max == 0:
        return []
    profile = density_profile(s, table.entries)
    out = []
    for n, pd in enumerate(profile.values, start=1):
        if pd.count != n:
            raise ConstructionBugError(f"rho_p({n}) count {pd.count} != {n}")
        out.append((n, pd))
    return out


@dataclass(frozen=True)
class DominationReport:
    slope: Fraction
    horizon: int
    last_crossing: Optional[int]  # largest n <= horizon with p(n) <= slope*n

    @property
    def dominated_from(self) -> Optional[int]:
        """First n after which ``p(n) > slope*n`` for the rest of the horizon."""
        if self.last_crossing is None:
            return 1
        if self.last_crossing >= self.horizon:
            return None
        return self.last_crossing + 1


def linear_domination_check(s: BitSequence, slopes: Sequence, horizon: int,
                            search_horizon: int = DEFAULT_SEARCH_HORIZON) -> List[DominationReport]:
    """For each slope k, where ``p_S(n) <= k*n`` last holds for ``n <= horizon``.

    When the set runs out of members below ``search_horizon`` the remaining
    ``p_S(n)`` are only known to exceed it; that suffices as long as the
    bound beats ``k*n``.
    """
    slopes = [Fraction(k) for k in slopes]
    if any(k <= 0 for k in slopes):
        raise ParameterError("slopes must be positive")
    members = _first_members(s, horizon, search_horizon)
    known = [m + 1 for m in members]
    reports = []
    for k in slopes:
        if len(known) < horizon and k * horizon >= search_horizon + 1:
            raise InsufficientMembersError(
                f"{s.label}: principal function known only to n={len(known)}; "
                f"cannot certify slope {k} up to {horizon}", achieved=len(known))
        last = None
        for n, p in enumerate(known, start=1):
            if p <= k * n:
                last = n
        reports.append(DominationReport(k, horizon, last))
    return reports


def factorial_array_witnesses(s: BitSequence, n_max: int):
    """``(n, rho_{(n+1)!})`` for each ``2 <= n <= n_max`` with ``S`` missing ``[n!, (n+1)!)``.

    The array starts at ``n = 2``: the interval ``[1, 2)`` is a single point
    and its bound ``rho_2 <= 1`` says nothing.
    """
    if n_max > 12:
        raise ParameterError("factorial array limited to n_max <= 12")
    out = []
    for n in range(2, n_max + 1):
        lo, hi = math.factorial(n), math.factorial(n + 1)
        if next_member(s, lo, hi) is not None:
            continue
        pd = PartialDensity(count_members(s, hi), hi)
        if pd.value * n > 1:
            raise ConstructionBugError(f"rho_{hi} = {pd.value} exceeds 1/{n}")
        out.append((n, pd))
    return out


@dataclass(frozen=True)
class PartitionBound:
    modulus: int
    residues: List[PartialDensity]
    total: PartialDensity

    @property
    def argmax(self) -> int:
        return max(range(self.modulus), key=lambda i: (self.residues[i].count, -i))


def finite_partition_bound(s: BitSequence, m: int, horizon: int) -> PartitionBound:
    """Split ``rho_horizon(S)`` across the residue classes mod ``m``."""
    if m < 2:
        raise ParameterError("partition needs m >= 2")
    if horizon < 1:
        raise ParameterError("horizon must be >= 1")
    counts = np.zeros(m, dtype=np.int64)
    for a, b in _spans(0, horizon):
        hits = np.flatnonzero(s.block(a, b)) + a
        counts += np.bincount(hits % m, minlength=m)
    residues = [PartialDensity(int(c), horizon) for c in counts]
    total = PartialDensity(int(counts.sum()), horizon)
    return PartitionBound(m, residues, total)
