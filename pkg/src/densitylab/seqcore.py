"""Characteristic sequences of subsets of the natural numbers.

A :class:`BitSequence` is a total, deterministic map ``index -> {0, 1}``.
Every sequence has a scalar evaluator; closed-form and PRNG-backed
sequences additionally carry a vectorised evaluator over numpy index
arrays, which is what keeps million-element prefixes cheap.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable, Iterable, Optional

import numpy as np

from .errors import HorizonError, ParameterError

KINDS = ("closed-form", "table-backed", "prng-backed", "derived")

SURROGATE_NOTE = (
    "prng-backed sequences are seeded pseudo-random surrogates; results on "
    "them are finite evidence, not properties of algorithmically random sets"
)

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class BitSequence:
    """A lazily evaluated subset of omega.

    ``known_density`` is descriptive metadata only; nothing in the package
    reads it when computing densities.
    """

    __slots__ = ("_evaluator", "_vector", "kind", "label", "known_density", "horizon",
                 "counter", "successor")

    def __init__(
        self,
        evaluator: Callable[[int], int],
        *,
        kind: str,
        label: str,
        known_density: Optional[Fraction] = None,
        vector: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        horizon: Optional[int] = None,
        counter: Optional[Callable[[int], int]] = None,
        successor: Optional[Callable[[int], Optional[int]]] = None,
    ):
        if kind not in KINDS:
            raise ParameterError(f"unknown sequence kind {kind!r}")
        self._evaluator = evaluator
        self._vector = vector
        self.kind = kind
        self.label = label
        self.known_density = None if known_density is None else Fraction(known_density)
        self.horizon = horizon
        # optional closed forms: |S & [0,n)| and least member >= n
        self.counter = counter
        self.successor = successor

    def __repr__(self):
        return f"BitSequence({self.label!r}, kind={self.kind!r})"

    def _check(self, n):
        if n < 0:
            raise ParameterError(f"negative index {n}")
        if self.horizon is not None and n >= self.horizon:
            raise HorizonError(f"{self.label}: index {n} beyond stored horizon {self.horizon}")

    def __call__(self, n: int) -> int:
        n = int(n)
        self._check(n)
        return 1 if self._evaluator(n) else 0

    bit = __call__

    @property
    def vectorised(self) -> bool:
        return self._vector is not None

    def at(self, indices) -> np.ndarray:
        """Bits at an array of indices, as ``uint8``."""
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size == 0:
            return np.zeros(0, dtype=np.uint8)
        lo, hi = int(idx.min()), int(idx.max())
        self._check(lo)
        self._check(hi)
        if self._vector is not None:
            return np.asarray(self._vector(idx), dtype=np.uint8)
        ev = self._evaluator
        return np.fromiter((1 if ev(int(k)) else 0 for k in idx), dtype=np.uint8, count=idx.size)

    def block(self, start: int, stop: int) -> np.ndarray:
        """Bits for indices ``start .. stop-1``."""
        if stop <= start:
            return np.zeros(0, dtype=np.uint8)
        return self.at(np.arange(start, stop, dtype=np.int64))

    def _relabel(self, label):
        return BitSequence(self._evaluator, kind=self.kind, label=label,
                           known_density=self.known_density, vector=self._vector,
                           horizon=self.horizon, counter=self.counter,
                           successor=self.successor)

    def members(self, stop: int, start: int = 0) -> list:
        return [int(k) + start for k in np.flatnonzero(self.block(start, stop))]


def prefix(s: BitSequence, n: int) -> str:
    """The first ``n`` bits of ``s`` as a ``0``/``1`` string."""
    if n < 0:
        raise ParameterError("prefix length must be non-negative")
    return "".join("1" if b else "0" for b in s.block(0, n))


# -- closed-form library -----------------------------------------------------

def _is_square(n):
    r = math.isqrt(n)
    return r * r == n


def _squares_vec(idx):
    r = np.floor(np.sqrt(idx.astype(np.float64))).astype(np.int64)
    # float sqrt can be off by one near large squares
    r = np.where(r * r > idx, r - 1, r)
    r = np.where((r + 1) * (r + 1) <= idx, r + 1, r)
    return r * r == idx


def _is_tower(n):
    # n = 2^(2^k): power of two whose exponent is a power of two
    if n < 2 or n & (n - 1):
        return False
    e = n.bit_length() - 1
    return e > 0 and e & (e - 1) == 0


def _tower_count(n):
    k = 0
    while (1 << (1 << k)) < n:
        k += 1
    return k


def _tower_successor(n):
    k = 0
    while (1 << (1 << k)) < n:
        k += 1
    return 1 << (1 << k)


def _dyadic_successor(e, n):
    unit = 1 << e
    j = max(1, -(-n // unit))
    if j % 2 == 0:
        j += 1
    return j * unit


_TOWER_SMALL = np.array([2, 4, 16, 256, 65536, 4294967296], dtype=np.int64)


def _tower_vec(idx):
    return np.isin(idx, _TOWER_SMALL)


def _dyadic_member(e):
    unit = 1 << e

    def ev(n):
        return n > 0 and n % unit == 0 and (n >> e) & 1 == 1

    def vec(idx):
        return (idx > 0) & ((idx & (unit - 1)) == 0) & (((idx >> e) & 1) == 1)

    return ev, vec


def _factorial_interval(n):
    """Return m with m! <= n < (m+1)!, for n >= 1."""
    m, f = 1, 1
    while f * (m + 1) <= n:
        m += 1
        f *= m
    return m


def _factorial_gaps(n):
    # union of D_m = [m!, (m+1)!) over even m >= 2
    return n >= 2 and _factorial_interval(n) % 2 == 0


_SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def _is_prime(n):
    if n < 2:
        return False
    for p in _SMALL_PRIMES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    # deterministic for n < 3.3e24
    for a in _SMALL_PRIMES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _primes_vec(idx):
    hi = int(idx.max()) + 1
    if hi > 1 << 26:
        return np.fromiter((_is_prime(int(k)) for k in idx), dtype=bool, count=idx.size)
    sieve = np.ones(hi, dtype=bool)
    sieve[:2] = False
    for p in range(2, math.isqrt(hi - 1) + 1):
        if sieve[p]:
            sieve[p * p :: p] = False
    return sieve[idx]


STANDARD_NAMES = (
    "evens", "odds", "squares", "tower", "arithmetic", "dyadic",
    "factorial_gaps", "primes", "all", "empty",
)


def standard_set(name: str, *params: int) -> BitSequence:
    """Build a named library set.

    ``arithmetic(m, i)`` is ``{km + i}``; ``dyadic(e)`` is ``{2^e * odd}``;
    ``tower`` is ``{2^(2^k)}``; ``factorial_gaps`` is the union of the
    intervals ``[m!, (m+1)!)`` for even ``m``.
    """
    arity = {"arithmetic": 2, "dyadic": 1}.get(name, 0)
    if name not in STANDARD_NAMES:
        raise ParameterError(f"unknown standard set {name!r}")
    if len(params) != arity:
        raise ParameterError(f"{name} takes {arity} parameter(s), got {len(params)}")
    params = tuple(int(p) for p in params)

    if name == "evens":
        return standard_set("arithmetic", 2, 0)._relabel("evens")
    if name == "odds":
        return standard_set("arithmetic", 2, 1)._relabel("odds")
    if name == "arithmetic":
        m, i = params
        if m < 1 or not 0 <= i < m:
            raise ParameterError(f"arithmetic({m},{i}) needs m >= 1 and 0 <= i < m")
        return BitSequence(
            lambda n: n % m == i,
            kind="closed-form",
            label=f"arithmetic:{m}:{i}",
            known_density=Fraction(1, m),
            vector=lambda idx: idx % m == i,
            counter=lambda n: max(0, -(-(n - i) // m)),
            successor=lambda n: n + (i - n) % m,
        )
    if name == "dyadic":
        (e,) = params
        if e < 0:
            raise ParameterError("dyadic(e) needs e >= 0")
        ev, vec = _dyadic_member(e)
        return BitSequence(ev, kind="closed-form", label=f"dyadic:{e}",
                           known_density=Fraction(1, 2 ** (e + 1)), vector=vec,
                           counter=lambda n: ((n + (1 << e) - 1) >> e) // 2,
                           successor=lambda n: _dyadic_successor(e, n))
    if name == "squares":
        return BitSequence(_is_square, kind="closed-form", label="squares",
                           known_density=Fraction(0), vector=_squares_vec,
                           counter=lambda n: math.isqrt(n - 1) + 1 if n > 0 else 0,
                           successor=lambda n: (math.isqrt(n - 1) + 1) ** 2 if n > 0 else 0)
    if name == "tower":
        return BitSequence(_is_tower, kind="closed-form", label="tower",
                           known_density=Fraction(0), vector=_tower_vec,
                           counter=_tower_count, successor=_tower_successor)
    if name == "factorial_gaps":
        return BitSequence(_factorial_gaps, kind="closed-form", label="factorial_gaps")
    if name == "primes":
        return BitSequence(_is_prime, kind="closed-form", label="primes",
                           known_density=Fraction(0), vector=_primes_vec)
    if name == "all":
        return BitSequence(lambda n: 1, kind="closed-form", label="all",
                           known_density=Fraction(1),
                           vector=lambda idx: np.ones(idx.shape, dtype=bool))
    return BitSequence(lambda n: 0, kind="closed-form", label="empty",
                       known_density=Fraction(0),
                       vector=lambda idx: np.zeros(idx.shape, dtype=bool))


def table_sequence(bits: Iterable[int], label: str = "table") -> BitSequence:
    """A finite table of bits; indices at or past its length raise."""
    table = np.array([1 if b else 0 for b in bits], dtype=np.uint8)
    return BitSequence(lambda n: table[n], kind="table-backed", label=label,
                       vector=lambda idx: table[idx], horizon=len(table))


# -- counter-mode PRNG -------------------------------------------------------

def _mix64(z):
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _mix_gamma(z):
    z = ((z ^ (z >> 33)) * 0xFF51AFD7ED558CCD) & _MASK64
    z = ((z ^ (z >> 33)) * 0xC4CEB9FE1A85EC53) & _MASK64
    z = (z ^ (z >> 33)) | 1
    if bin(z ^ (z >> 1)).count("1") < 24:
        z ^= 0xAAAAAAAAAAAAAAAA
    return z


def _mix64_vec(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


class SplitMixStream:
    """Keyed counter-mode generator: word ``n`` depends only on (seed, n).

    The key and the odd increment are both derived from the seed, following
    the SplitMix64 "split" construction, so streams for different seeds are
    not shifts of one another.
    """

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed <= _MASK64:
            raise ParameterError("seed must be a 64-bit unsigned integer")
        self.seed = seed
        self.key = _mix64((seed + _GOLDEN) & _MASK64)
        self.gamma = _mix_gamma((seed + 2 * _GOLDEN) & _MASK64)

    def word(self, n: int) -> int:
        return _mix64((self.key + (n + 1) * self.gamma) & _MASK64)

    def words(self, idx: np.ndarray) -> np.ndarray:
        with np.errstate(over="ignore"):
            ctr = idx.astype(np.uint64) + np.uint64(1)
            z = np.uint64(self.key) + ctr * np.uint64(self.gamma)
            return _mix64_vec(z)


def prng_sequence(seed: int) -> BitSequence:
    """Pseudo-random bits; bit ``n`` is the top bit of word ``n``.

    A surrogate for a random set, see :data:`SURROGATE_NOTE`.
    """
    stream = SplitMixStream(seed)
    return BitSequence(
        lambda n: stream.word(n) >> 63,
        kind="prng-backed",
        label=f"prng:{stream.seed}",
        known_density=Fraction(1, 2),
        vector=lambda idx: (stream.words(idx) >> np.uint64(63)).astype(np.uint8),
    )


# -- combinators -------------------------------------------------------------

def combine(op: str, a: BitSequence, b: Optional[BitSequence] = None) -> BitSequence:
    """Pointwise intersect / union of two sequences, or complement of one."""
    if op == "complement":
        if b is not None:
            raise ParameterError("complement takes exactly one sequence")
        vec = None
        if a.vectorised:
            vec = lambda idx: 1 - a.at(idx)  # noqa: E731
        return BitSequence(lambda n: 1 - a(n), kind="derived", label=f"~{a.label}",
                           vector=vec, horizon=a.horizon)
    if op not in ("intersect", "union"):
        raise ParameterError(f"unknown combinator {op!r}")
    if b is None:
        raise ParameterError(f"{op} takes two sequences")
    horizon = _min_horizon(a.horizon, b.horizon)
    vec = None
    if op == "intersect":
        ev = lambda n: a(n) and b(n)  # noqa: E731
        if a.vectorised and b.vectorised:
            vec = lambda idx: a.at(idx) & b.at(idx)  # noqa: E731
        sym = "&"
    else:
        ev = lambda n: a(n) or b(n)  # noqa: E731
        if a.vectorised and b.vectorised:
            vec = lambda idx: a.at(idx) | b.at(idx)  # noqa: E731
        sym = "|"
    return BitSequence(ev, kind="derived", label=f"({a.label}{sym}{b.label})",
                       vector=vec, horizon=horizon)


def intersect_all(seqs) -> BitSequence:
    seqs = list(seqs)
    if not seqs:
        raise ParameterError("need at least one sequence")
    out = seqs[0]
    for s in seqs[1:]:
        out = combine("intersect", out, s)
    return out


def _min_horizon(h1, h2):
    if h1 is None:
        return h2
    if h2 is None:
        return h1
    return min(h1, h2)
