"""Computable sets with prescribed rational lower and upper density."""

from __future__ import annotations

import bisect
import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import List

import numpy as np

from .errors import ParameterError
from .seqcore import BitSequence, combine, standard_set


@dataclass(frozen=True)
class OscillationSchedule:
    boundaries: List[int]  # start index of each phase; phase 0 emits ones
    targets: List[Fraction]  # density each phase runs toward
    growth: Fraction  # smallest ratio between consecutive boundaries seen so far

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.boundaries, self.boundaries[1:])):
            raise ParameterError("phase boundaries must be strictly increasing")
        if any(not 0 <= t <= 1 for t in self.targets):
            raise ParameterError("phase targets must lie in [0, 1]")


class _Oscillator:
    """Run-length generator: ones until rho >= upper, zeros until rho <= lower.

    A target of exactly 0 or 1 can never be reached by a partial density
    after the first opposite bit, so such targets are replaced by a
    sequence converging to them (``lower + (upper-lower)/(j+3)`` style).
    The liminf and limsup are unchanged.
    """

    def __init__(self, lower: Fraction, upper: Fraction):
        self.lower, self.upper = lower, upper
        self.starts = [0]  # phase start indices
        self.counts = [0]  # members below each phase start
        self.targets: List[Fraction] = []
        self._lock = threading.Lock()

    def _target(self, phase):
        j = phase // 2
        if phase % 2 == 0:
            if self.upper < 1:
                return self.upper
            return 1 - (1 - self.lower) / (j + 3)
        if self.lower > 0:
            return self.lower
        return self.upper / (j + 3)

    def _next_phase(self):
        phase = len(self.starts) - 1
        n, c = self.starts[-1], self.counts[-1]
        target = self._target(phase)
        if phase % 2 == 0:
            # least t >= 1 with (c + t) / (n + t) >= target
            t = max(1, math.ceil((target * n - c) / (1 - target)))
            c += t
        else:
            # least t >= 1 with c / (n + t) <= target
            t = max(1, math.ceil(c / target - n))
        self.targets.append(target)
        self.starts.append(n + t)
        self.counts.append(c)

    def ensure(self, index):
        if index < self.starts[-1]:
            return
        with self._lock:
            while index >= self.starts[-1]:
                self._next_phase()

    def phase_of(self, n):
        self.ensure(n)
        return bisect.bisect_right(self.starts, n) - 1

    def bit(self, n):
        return 1 - self.phase_of(n) % 2

    def vector(self, idx):
        self.ensure(int(idx.max()))
        starts = np.array(self.starts, dtype=np.int64)
        phase = np.searchsorted(starts, idx, side="right") - 1
        return (1 - phase % 2).astype(np.uint8)

    def count(self, n):
        if n <= 0:
            return 0
        ph = self.phase_of(n - 1)
        base = self.counts[ph]
        return base + (n - self.starts[ph] if ph % 2 == 0 else 0)

    def successor(self, n):
        ph = self.phase_of(n)
        if ph % 2 == 0:
            return n
        self.ensure(self.starts[ph + 1])
        return self.starts[ph + 1]


def _as_fraction(x) -> Fraction:
    if isinstance(x, float):
        raise ParameterError("targets must be exact rationals, not floats")
    return Fraction(x)


def build_prescribed_density(lower, upper) -> BitSequence:
    """A computable set with lower density ``lower`` and upper density ``upper``.

    ``(0, 0)`` gives the squares and ``(1, 1)`` their complement so that
    the result stays infinite and co-infinite; ``(d, d)`` gives the
    Beatty set ``floor((n+1)d) - floor(nd)``; anything else oscillates.
    """
    lower, upper = _as_fraction(lower), _as_fraction(upper)
    if not 0 <= lower <= upper <= 1:
        raise ParameterError(f"need 0 <= lower <= upper <= 1, got ({lower}, {upper})")
    label = f"prescribed:{lower}:{upper}"
    if lower == upper == 0:
        return standard_set("squares")._relabel(label)
    if lower == upper == 1:
        return combine("complement", standard_set("squares"))._relabel(label)
    if lower == upper:
        p, q = lower.numerator, lower.denominator

        def vec(idx):
            return ((idx + 1) * p) // q - (idx * p) // q

        return BitSequence(
            lambda n: ((n + 1) * p) // q - (n * p) // q,
            kind="closed-form", label=label, known_density=lower, vector=vec,
            counter=lambda n: (n * p) // q if n > 0 else 0,
        )
    return OscillatingSequence(_Oscillator(lower, upper), label)


class OscillatingSequence(BitSequence):
    """Prescribed-density set built by the oscillator; exposes its phases."""

    __slots__ = ("_osc",)

    def __init__(self, osc: _Oscillator, label: str):
        super().__init__(osc.bit, kind="derived", label=label, vector=osc.vector,
                         counter=osc.count, successor=osc.successor)
        self._osc = osc

    def schedule(self, upto: int) -> OscillationSchedule:
        """Phase boundaries and targets covering indices below ``upto``."""
        osc = self._osc
        osc.ensure(upto)
        k = bisect.bisect_right(osc.starts, upto)
        starts = osc.starts[:k]
        ratios = [Fraction(b, a) for a, b in zip(starts, starts[1:]) if a > 0]
        return OscillationSchedule(list(starts), list(osc.targets[:k]),
                                   min(ratios) if ratios else Fraction(2))
