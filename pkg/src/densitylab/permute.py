"""Computable injections and permutations of omega, and what they do to sets.

Permutations carry both directions.  Those built by sequential assignment
(:func:`injection_to_permutation`, :func:`orbit_permutation`) extend a
memoised frontier under a lock, so concurrent readers are safe.
"""

from __future__ import annotations

import bisect
import math
import threading
from fractions import Fraction
from typing import Callable, NamedTuple, Optional

import numpy as np

from .construct import build_prescribed_density
from .errors import (
    ConstructionBugError,
    InjectivityError,
    InsufficientMembersError,
    ParameterError,
    PermutationIntegrityError,
)
from .seqcore import BitSequence, SplitMixStream

DEFAULT_MAX_SCAN = 1 << 27


class ComputableInjection:
    """A total injection ``omega -> omega`` with on-the-fly injectivity checks.

    Every value ever produced is remembered up to the evaluation frontier;
    a repeated value raises :class:`InjectivityError`.
    """

    def __init__(self, forward: Callable[[int], int], label: str,
                 vector: Optional[Callable[[np.ndarray], np.ndarray]] = None):
        self.forward = forward
        self.label = label
        self._vector = vector
        self._seen = set()
        self._frontier = 0
        self._lock = threading.Lock()

    def __repr__(self):
        return f"ComputableInjection({self.label!r})"

    def check_to(self, n: int):
        """Verify injectivity on ``[0, n)``."""
        if n <= self._frontier:
            return
        with self._lock:
            start = self._frontier
            if n <= start:
                return
            if self._vector is not None:
                vals = self._vector(np.arange(start, n, dtype=np.int64)).tolist()
            else:
                vals = [self.forward(k) for k in range(start, n)]
            fresh = set(vals)
            if len(fresh) != len(vals) or not self._seen.isdisjoint(fresh):
                seen = set(self._seen)
                for k, v in enumerate(vals, start):
                    if v in seen:
                        raise InjectivityError(f"{self.label}: value {v} repeated at argument {k}")
                    seen.add(v)
            self._seen |= fresh
            self._frontier = n

    def __call__(self, n: int) -> int:
        self.check_to(n + 1)
        return self.forward(n)

    def values(self, start: int, stop: int) -> np.ndarray:
        self.check_to(stop)
        idx = np.arange(start, stop, dtype=np.int64)
        if self._vector is not None:
            return np.asarray(self._vector(idx), dtype=np.int64)
        return np.array([self.forward(int(k)) for k in idx], dtype=np.int64)


class ComputablePermutation:
    """A bijection of omega with explicit forward and inverse maps."""

    def __init__(self, forward: Callable[[int], int], inverse: Callable[[int], int],
                 label: str, vector_forward=None, vector_inverse=None):
        self.forward = forward
        self.inverse = inverse
        self.label = label
        self._vf = vector_forward
        self._vi = vector_inverse

    def __repr__(self):
        return f"ComputablePermutation({self.label!r})"

    def __call__(self, n: int) -> int:
        return self.forward(n)

    def inv(self, n: int) -> int:
        return self.inverse(n)

    def checked_inverse(self, n: int) -> int:
        m = self.inverse(n)
        if self.forward(m) != n:
            raise PermutationIntegrityError(
                f"{self.label}: forward(inverse({n})) = {self.forward(m)}")
        return m

    def forward_values(self, idx: np.ndarray) -> np.ndarray:
        if self._vf is not None:
            return np.asarray(self._vf(idx), dtype=np.int64)
        return np.array([self.forward(int(k)) for k in idx], dtype=np.int64)

    def inverse_values(self, idx: np.ndarray) -> np.ndarray:
        if self._vi is not None:
            return np.asarray(self._vi(idx), dtype=np.int64)
        return np.array([self.inverse(int(k)) for k in idx], dtype=np.int64)

    def check_roundtrip(self, n: int):
        """Round-trip both directions on ``[0, n)``."""
        if self._vf is None or self._vi is None:
            # plain ints: values may exceed int64
            for k in range(n):
                if self.inverse(self.forward(k)) != k:
                    raise PermutationIntegrityError(f"{self.label}: inverse(forward({k})) != {k}")
                if self.forward(self.inverse(k)) != k:
                    raise PermutationIntegrityError(f"{self.label}: forward(inverse({k})) != {k}")
            return
        idx = np.arange(n, dtype=np.int64)
        back = self.inverse_values(self.forward_values(idx))
        if not np.array_equal(back, idx):
            bad = int(np.flatnonzero(back != idx)[0])
            raise PermutationIntegrityError(f"{self.label}: inverse(forward({bad})) != {bad}")
        back = self.forward_values(self.inverse_values(idx))
        if not np.array_equal(back, idx):
            bad = int(np.flatnonzero(back != idx)[0])
            raise PermutationIntegrityError(f"{self.label}: forward(inverse({bad})) != {bad}")

    def as_injection(self) -> ComputableInjection:
        return ComputableInjection(self.forward, self.label, vector=self._vf)


# -- sets under maps ---------------------------------------------------------

def image_set(pi: ComputablePermutation, s: BitSequence) -> BitSequence:
    """``pi(S)``: bit ``n`` is ``S(pi^-1(n))``."""

    def vec(idx):
        try:
            pre = pi.inverse_values(idx)
        except OverflowError:
            return np.array([s(pi.checked_inverse(int(n))) for n in idx], dtype=np.uint8)
        if not np.array_equal(pi.forward_values(pre), idx):
            raise PermutationIntegrityError(f"{pi.label}: inverse inconsistent on queried block")
        return s.at(pre)

    return BitSequence(lambda n: s(pi.checked_inverse(n)), kind="derived",
                       label=f"{pi.label}({s.label})", vector=vec)


def sampled_subsequence(p: ComputableInjection, s: BitSequence) -> BitSequence:
    """``p^-1(S)``: bit ``n`` is ``S(p(n))``."""

    def vec(idx):
        p.check_to(int(idx.max()) + 1)
        if p._vector is not None:
            return s.at(np.asarray(p._vector(idx), dtype=np.int64))
        return s.at(np.array([p.forward(int(k)) for k in idx], dtype=np.int64))

    return BitSequence(lambda n: s(p(n)), kind="derived",
                       label=f"sample[{p.label}]({s.label})", vector=vec)


# -- library maps ------------------------------------------------------------

def identity() -> ComputablePermutation:
    return ComputablePermutation(lambda n: n, lambda n: n, "identity",
                                 vector_forward=lambda i: i, vector_inverse=lambda i: i)


def swap_adjacent() -> ComputablePermutation:
    """``2k <-> 2k+1``."""
    return ComputablePermutation(lambda n: n ^ 1, lambda n: n ^ 1, "swap",
                                 vector_forward=lambda i: i ^ 1, vector_inverse=lambda i: i ^ 1)


def injection(name: str, *params: int) -> ComputableInjection:
    """Library injections: identity, affine(a, b) = an+b, power(k) = n^k, triangular, swap."""
    params = tuple(int(x) for x in params)
    if name == "identity" and not params:
        return ComputableInjection(lambda n: n, "identity", vector=lambda i: i)
    if name == "affine" and len(params) == 2:
        a, b = params
        if a < 1 or b < 0:
            raise ParameterError("affine injection needs a >= 1, b >= 0")
        return ComputableInjection(lambda n: a * n + b, f"affine:{a}:{b}",
                                   vector=lambda i: a * i + b)
    if name == "power" and len(params) == 1:
        (k,) = params
        if k < 1:
            raise ParameterError("power injection needs k >= 1")

        def vec(i):
            if i.size and int(i.max()) ** k >= 1 << 63:
                raise ParameterError(f"power:{k} overflows int64 on this block")
            return i ** k

        return ComputableInjection(lambda n: n ** k, f"power:{k}", vector=vec)
    if name == "triangular" and not params:
        return ComputableInjection(lambda n: n * (n + 1) // 2, "triangular",
                                   vector=lambda i: i * (i + 1) // 2)
    if name == "swap" and not params:
        return ComputableInjection(lambda n: n ^ 1, "swap", vector=lambda i: i ^ 1)
    raise ParameterError(f"unknown injection {name!r} with {len(params)} parameter(s)")


def compose(outer: ComputablePermutation, inner: ComputablePermutation) -> ComputablePermutation:
    """``outer . inner``: apply ``inner`` first."""
    vf = vi = None
    if outer._vf is not None and inner._vf is not None:
        vf = lambda i: outer.forward_values(inner.forward_values(i))  # noqa: E731
    if outer._vi is not None and inner._vi is not None:
        vi = lambda i: inner.inverse_values(outer.inverse_values(i))  # noqa: E731
    return ComputablePermutation(
        lambda n: outer.forward(inner.forward(n)),
        lambda n: inner.inverse(outer.inverse(n)),
        f"compose:{outer.label},{inner.label}",
        vector_forward=vf, vector_inverse=vi,
    )


def invert(pi: ComputablePermutation) -> ComputablePermutation:
    label = pi.label[len("invert:"):] if pi.label.startswith("invert:") else f"invert:{pi.label}"
    return ComputablePermutation(pi.inverse, pi.forward, label,
                                 vector_forward=pi._vi, vector_inverse=pi._vf)


class _BlockShuffle:
    # block k is [2^k, 2^(k+1)); its order is the argsort of that block's
    # words in the seed's stream, so blocks never share randomness
    def __init__(self, seed):
        self.stream = SplitMixStream(seed)
        self._perm = {}
        self._lock = threading.Lock()

    def _block(self, k):
        got = self._perm.get(k)
        if got is None:
            with self._lock:
                got = self._perm.get(k)
                if got is None:
                    lo = 1 << k
                    words = self.stream.words(np.arange(lo, 2 * lo, dtype=np.int64))
                    fwd = np.argsort(words, kind="stable").astype(np.int64)
                    inv = np.empty_like(fwd)
                    inv[fwd] = np.arange(lo, dtype=np.int64)
                    got = self._perm[k] = (fwd, inv)
        return got

    def map(self, n, which):
        if n < 2:
            return n
        k = n.bit_length() - 1
        return (1 << k) + int(self._block(k)[which][n - (1 << k)])

    def map_vec(self, idx, which):
        out = idx.copy()
        big = idx >= 2
        if not big.any():
            return out
        ks = np.zeros_like(idx)
        ks[big] = np.floor(np.log2(idx[big].astype(np.float64))).astype(np.int64)
        # guard float log2 at exact powers of two
        ks[big] = np.where((1 << ks[big]) > idx[big], ks[big] - 1, ks[big])
        ks[big] = np.where((2 << ks[big]) <= idx[big], ks[big] + 1, ks[big])
        for k in np.unique(ks[big]):
            sel = big & (ks == k)
            lo = 1 << int(k)
            out[sel] = lo + self._block(int(k))[which][idx[sel] - lo]
        return out


def block_shuffle(seed: int) -> ComputablePermutation:
    """Shuffle each dyadic block ``[2^k, 2^(k+1))`` by a seeded permutation."""
    bs = _BlockShuffle(seed)
    return ComputablePermutation(
        lambda n: bs.map(n, 0), lambda n: bs.map(n, 1), f"blockshuffle:{bs.stream.seed}",
        vector_forward=lambda i: bs.map_vec(i, 0), vector_inverse=lambda i: bs.map_vec(i, 1),
    )


# -- injection -> permutation ------------------------------------------------

class _SquareSlotPermutation:
    """Assign ``pi(j)`` in increasing ``j``: take ``p(j)`` at non-square ``j``
    when still free, otherwise the least unassigned value."""

    def __init__(self, p: ComputableInjection):
        self.p = p
        self.values = []  # values[j] = pi(j)
        self.where = {}  # value -> j
        self.least = 0
        self._lock = threading.Lock()

    def _assign_next(self):
        j = len(self.values)
        r = math.isqrt(j)
        v = None
        if r * r != j:
            cand = self.p(j)
            if cand not in self.where:
                v = cand
        if v is None:
            while self.least in self.where:
                self.least += 1
            v = self.least
        self.values.append(v)
        self.where[v] = j

    def extend_to(self, n):
        if len(self.values) >= n:
            return
        with self._lock:
            while len(self.values) < n:
                self._assign_next()

    def forward(self, j):
        self.extend_to(j + 1)
        return self.values[j]

    def inverse(self, v):
        j = self.where.get(v)
        if j is not None:
            return j
        with self._lock:
            while v not in self.where:
                self._assign_next()
        return self.where[v]

    def forward_vec(self, idx):
        self.extend_to(int(idx.max()) + 1)
        return np.asarray(self.values, dtype=np.int64)[idx]


def injection_to_permutation(p: ComputableInjection) -> ComputablePermutation:
    sq = _SquareSlotPermutation(p)
    return ComputablePermutation(sq.forward, sq.inverse, f"inj2perm:{p.label}",
                                 vector_forward=sq.forward_vec)


def _ceil_sqrt(ns):
    r = np.floor(np.sqrt(ns.astype(np.float64))).astype(np.int64)
    r = np.where(r * r > ns, r - 1, r)
    r = np.where((r + 1) * (r + 1) <= ns, r + 1, r)
    return np.where(r * r == ns, r, r + 1)


class TransferReport(NamedTuple):
    horizon: int
    max_difference: Fraction  # max over n of |rho_n(pi^-1 S) - rho_n(p^-1 S)|
    worst_margin: float  # min over n of 2/sqrt(n) - difference
    worst_n: int


def verify_density_transfer(p: ComputableInjection, s: BitSequence, horizon: int,
                            pi: Optional[ComputablePermutation] = None) -> TransferReport:
    """Check the square-slot permutation tracks ``p`` to within ``2/sqrt(n)``.

    The count difference is also held to ``ceil(sqrt(n))``.  Both are
    theorems about the construction, so a violation raises
    :class:`ConstructionBugError` rather than reporting a tolerance miss.
    """
    if horizon < 4:
        raise ParameterError("horizon must be >= 4")
    if pi is None:
        pi = injection_to_permutation(p)
    idx = np.arange(horizon, dtype=np.int64)
    via_pi = np.cumsum(s.at(pi.forward_values(idx)), dtype=np.int64)
    via_p = np.cumsum(s.at(p.values(0, horizon)), dtype=np.int64)
    diff = np.abs(via_pi - via_p)
    ns = idx + 1
    # |d|/n < 2/sqrt(n)  <=>  d^2 < 4n, exact in integers
    bad = np.flatnonzero(diff * diff >= 4 * ns)
    if bad.size:
        n = int(ns[bad[0]])
        raise ConstructionBugError(f"{pi.label} on {s.label}: bound 2/sqrt(n) violated at n={n}")
    ceil_sqrt = _ceil_sqrt(ns)
    bad = np.flatnonzero(diff > ceil_sqrt)
    if bad.size:
        n = int(ns[bad[0]])
        raise ConstructionBugError(f"{pi.label} on {s.label}: count gap exceeds ceil(sqrt(n)) at n={n}")
    margins = 2 / np.sqrt(ns) - diff / ns
    w = int(np.argmin(margins))
    k = int(np.argmax(diff / ns))
    return TransferReport(horizon, Fraction(int(diff[k]), int(ns[k])), float(margins[w]), int(ns[w]))


# -- orbits of infinite co-infinite sets -------------------------------------

class _SetIndex:
    """Incremental scan of a set, answering rank and k-th member/non-member."""

    CHUNK = 1 << 12
    SCAN = 1 << 16

    def __init__(self, s: BitSequence, max_scan: int):
        self.s = s
        # a table-backed set cannot be scanned past its stored horizon
        self.limit = max_scan if s.horizon is None else min(max_scan, s.horizon)
        self.blocks = []  # uint8 bit arrays of length CHUNK; the last may be shorter
        self.cum = [0]  # members below each chunk start
        self.scanned = 0
        self._lock = threading.Lock()

    def _scan_more(self):
        with self._lock:
            start = self.scanned
            if start >= self.limit:
                raise InsufficientMembersError(
                    f"{self.s.label}: ran out of scan horizon {self.limit}; "
                    "set looks finite or co-finite here", achieved=self.cum[-1])
            stop = min(start + self.SCAN, self.limit)
            bits = self.s.block(start, stop)
            for off in range(0, stop - start, self.CHUNK):
                b = bits[off: off + self.CHUNK]
                self.blocks.append(b)
                self.cum.append(self.cum[-1] + int(b.sum(dtype=np.int64)))
            self.scanned = stop

    def rank(self, n):
        """Members below ``n``."""
        while self.scanned < n:
            self._scan_more()
        c, off = divmod(n, self.CHUNK)
        if off == 0:
            return self.cum[c]
        return self.cum[c] + int(self.blocks[c][:off].sum(dtype=np.int64))

    def kth(self, k, member=True):
        """Position of the ``k``-th (0-based) member, or non-member."""
        def total(c):
            return self.cum[c] if member else min(c * self.CHUNK, self.scanned) - self.cum[c]

        while total(len(self.blocks)) <= k:
            self._scan_more()
        if member:
            c = bisect.bisect_right(self.cum, k) - 1
        else:
            lo, hi = 0, len(self.blocks)
            while lo < hi:
                mid = (lo + hi + 1) // 2
                if total(mid) <= k:
                    lo = mid
                else:
                    hi = mid - 1
            c = lo
        b = self.blocks[c]
        hits = np.flatnonzero(b if member else 1 - b)
        return c * self.CHUNK + int(hits[k - total(c)])


def orbit_permutation(a: BitSequence, b: BitSequence,
                      max_scan: int = DEFAULT_MAX_SCAN) -> ComputablePermutation:
    """Send the k-th member of ``a`` to the k-th member of ``b``, and likewise
    for non-members, so that ``image_set(pi, a) == b``."""
    ia, ib = _SetIndex(a, max_scan), _SetIndex(b, max_scan)

    def across(src, dst, n):
        r = src.rank(n)
        if src.s(n):
            return dst.kth(r, True)
        return dst.kth(n - r, False)

    return ComputablePermutation(lambda n: across(ia, ib, n), lambda n: across(ib, ia, n),
                                 f"orbit:{a.label}:{b.label}")


def density_shift(a: BitSequence, lower, upper,
                  max_scan: int = DEFAULT_MAX_SCAN) -> ComputablePermutation:
    """A permutation sending ``a`` onto a set of the prescribed lower/upper density."""
    target = build_prescribed_density(lower, upper)
    return orbit_permutation(a, target, max_scan)
