"""Partial descriptions, a toy register machine, and the index-set adversary.

Programs are naturals decoded as ``pair(core, pad)`` under the Cantor
pairing.  The core is a register-machine program over three instructions;
the pad is ignored when running, which gives every program infinitely many
computably listed equivalent codes.
"""

from __future__ import annotations

import bisect
import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

from .density import PartialDensity
from .errors import ConstructionBugError, DecisionTimeout, ParameterError
from .permute import ComputablePermutation, image_set
from .seqcore import BitSequence

FINITE_BATTERY_CAVEAT = (
    "finite battery: passing every listed permutation is evidence about these "
    "permutations only, not a statement about all computable permutations"
)


# -- pairing -----------------------------------------------------------------

def pair(x: int, y: int) -> int:
    """Cantor pairing, a bijection omega^2 -> omega."""
    if x < 0 or y < 0:
        raise ParameterError("pair() takes naturals")
    s = x + y
    return s * (s + 1) // 2 + y


def unpair(z: int) -> Tuple[int, int]:
    if z < 0:
        raise ParameterError("unpair() takes a natural")
    w = (math.isqrt(8 * z + 1) - 1) // 2
    y = z - w * (w + 1) // 2
    return w - y, y


# -- instructions and cores ---------------------------------------------------

class Instr(NamedTuple):
    op: str  # "INC", "DECJZ" or "HALT"
    reg: int = 0
    target: int = 0  # jump label for DECJZ; len(program) means "fall off"

    def __str__(self):
        if self.op == "HALT":
            return "HALT"
        if self.op == "INC":
            return f"INC r{self.reg}"
        return f"DECJZ r{self.reg},{self.target}"


def _length_count(length):
    return ((length + 1) ** 2) ** length


def _digit_to_instr(d, length):
    if d == 0:
        return Instr("HALT")
    if d <= length:
        return Instr("INC", d - 1)
    d -= 1 + length
    return Instr("DECJZ", d // (length + 1), d % (length + 1))


def _instr_to_digit(ins, length):
    if ins.op == "HALT":
        return 0
    if not 0 <= ins.reg < length:
        raise ParameterError(f"register {ins.reg} out of range for length {length}")
    if ins.op == "INC":
        return 1 + ins.reg
    if ins.op == "DECJZ":
        if not 0 <= ins.target <= length:
            raise ParameterError(f"label {ins.target} out of range for length {length}")
        return 1 + length + ins.reg * (length + 1) + ins.target
    raise ParameterError(f"unknown instruction {ins.op!r}")


@lru_cache(maxsize=1 << 16)
def decode_core(c: int) -> Tuple[Instr, ...]:
    """Length-lex decoding; every natural is a valid core.

    A length-L core uses registers ``0..L-1`` and labels ``0..L``, so each
    position is a digit in base ``(L+1)^2``.
    """
    if c < 0:
        raise ParameterError("core code must be a natural")
    length = 0
    while c >= _length_count(length):
        c -= _length_count(length)
        length += 1
    base = (length + 1) ** 2
    digits = []
    for _ in range(length):
        c, d = divmod(c, base)
        digits.append(d)
    return tuple(_digit_to_instr(d, length) for d in reversed(digits))


def encode_core(instrs: Sequence[Instr]) -> int:
    length = len(instrs)
    base = (length + 1) ** 2
    value = 0
    for ins in instrs:
        value = value * base + _instr_to_digit(Instr(*ins), length)
    return sum(_length_count(k) for k in range(length)) + value


@dataclass(frozen=True)
class ToyProgram:
    code: int
    core_code: int
    pad: int
    core: Tuple[Instr, ...] = field(repr=False)

    def listing(self) -> str:
        return "; ".join(str(i) for i in self.core) or "<empty>"


def encode(core: Union[int, Sequence[Instr]], pad: int) -> int:
    """Program code for a core (given as code or instruction list) and a pad."""
    c = core if isinstance(core, int) else encode_core(core)
    return pair(c, pad)


def core_of(code: int) -> int:
    return unpair(code)[0]


def enumerate_program(n: int) -> ToyProgram:
    c, pad = unpair(n)
    return ToyProgram(n, c, pad, decode_core(c))


class Halted(NamedTuple):
    output: int
    steps: int


class Pending(NamedTuple):
    steps: int


RunResult = Union[Halted, Pending]


def _execute(core, x, budget, watch_states=False):
    """Run ``core`` on input ``x``; returns (status, output, steps).

    ``status`` is "halted", "pending", or "loop" when ``watch_states`` is
    set and an exact machine state repeats.
    """
    size = len(core)
    regs = [0] * max(size, 1)
    regs[0] = x
    pc = steps = 0
    seen = set() if watch_states else None
    while steps < budget:
        if seen is not None:
            state = (pc, tuple(regs))
            if state in seen:
                return "loop", None, steps
            seen.add(state)
        steps += 1
        if pc >= size:
            return "halted", regs[0], steps
        ins = core[pc]
        if ins.op == "HALT":
            return "halted", regs[0], steps
        if ins.op == "INC":
            regs[ins.reg] += 1
            pc += 1
        elif regs[ins.reg] == 0:
            pc = ins.target
        else:
            regs[ins.reg] -= 1
            pc += 1
    return "pending", None, steps


def run(prog: ToyProgram, x: int, budget: int) -> RunResult:
    """Run at most ``budget`` steps; falling off the end counts as a step."""
    if budget < 1:
        raise ParameterError("budget must be >= 1")
    if x < 0:
        raise ParameterError("input must be a natural")
    status, out, steps = _execute(prog.core, x, budget)
    return Halted(out, steps) if status == "halted" else Pending(steps)


def padding_enumeration(e: int, i: int) -> int:
    """``x_{e,0} = e`` and ``x_{e,i} = pair(core(e), 1 + pair(e, i-1))``.

    The pad names ``(e, i)``, so codes with ``i >= 1`` are distinct across
    all ``e`` and ``i``; none has pad 0.
    """
    if e < 0 or i < 0:
        raise ParameterError("padding_enumeration takes naturals")
    if i == 0:
        return e
    return pair(core_of(e), 1 + pair(e, i - 1))


# -- partial descriptions ----------------------------------------------------

class PartialDescription:
    """``evaluate(n, budget)`` returns 0, 1, or ``None`` for pending.

    Implementations must be budget-monotone: once a value converges it stays
    the same for every larger budget.
    """

    def __init__(self, evaluate: Callable[[int, int], Optional[int]], label: str):
        self._evaluate = evaluate
        self.label = label

    def __repr__(self):
        return f"PartialDescription({self.label!r})"

    def evaluate(self, n: int, budget: int) -> Optional[int]:
        v = self._evaluate(n, budget)
        if v is None:
            return None
        return 1 if v else 0

    __call__ = evaluate


def total_description(a: BitSequence) -> PartialDescription:
    return PartialDescription(lambda n, t: a(n), f"total:{a.label}")


def never_description() -> PartialDescription:
    return PartialDescription(lambda n, t: None, "never")


def avoiding_description(a: BitSequence, avoid: BitSequence) -> PartialDescription:
    """Describes ``a`` but stays pending exactly on ``avoid``."""
    return PartialDescription(lambda n, t: None if avoid(n) else a(n),
                              f"avoid:{avoid.label}:{a.label}")


def delayed_description(a: BitSequence, cost: Callable[[int], int]) -> PartialDescription:
    """Describes ``a`` once the budget reaches ``cost(n)``."""
    return PartialDescription(lambda n, t: a(n) if t >= cost(n) else None,
                              f"delayed:{a.label}")


def domain_density(f: PartialDescription, horizon: int, budget: int) -> PartialDensity:
    """Fraction of ``n < horizon`` on which ``f`` converges within ``budget``."""
    if horizon < 1 or budget < 1:
        raise ParameterError("horizon and budget must be >= 1")
    hits = sum(1 for n in range(horizon) if f.evaluate(n, budget) is not None)
    return PartialDensity(hits, horizon)


def consistency_check(f: PartialDescription, a: BitSequence, horizon: int,
                      budget: int) -> Optional[int]:
    """First ``n < horizon`` where ``f`` converges to the wrong bit, else ``None``."""
    if horizon < 1 or budget < 1:
        raise ParameterError("horizon and budget must be >= 1")
    bits = a.block(0, horizon)
    for n in range(horizon):
        v = f.evaluate(n, budget)
        if v is not None and v != bits[n]:
            return n
    return None


def _assess(f, a, horizon, budget):
    # one pass: domain count and first violation
    bits = a.block(0, horizon)
    hits, violation = 0, None
    for n in range(horizon):
        v = f.evaluate(n, budget)
        if v is None:
            continue
        hits += 1
        if violation is None and v != bits[n]:
            violation = n
    return PartialDensity(hits, horizon), violation


def describe_under_permutation(f: PartialDescription,
                               pi: ComputablePermutation) -> PartialDescription:
    """``n, t -> f(pi^-1(n), t)``, a description of ``pi(A)`` when ``f`` describes ``A``."""
    return PartialDescription(lambda n, t: f.evaluate(pi.checked_inverse(n), t),
                              f"{pi.label}[{f.label}]")


# -- intrinsic evaluation modes ------------------------------------------------

@dataclass(frozen=True)
class BatteryEntry:
    permutation: str
    description: str
    domain: Optional[PartialDensity]
    violation: Optional[int]
    queries: Optional[int] = None
    error: Optional[str] = None

    @property
    def consistent(self) -> bool:
        return self.error is None and self.violation is None

    def row(self) -> dict:
        d = self.domain
        return {
            "permutation": self.permutation,
            "description": self.description,
            "domain_count": "" if d is None else d.count,
            "horizon": "" if d is None else d.horizon,
            "domain_density_float": "" if d is None else float(d),
            "violation": "" if self.violation is None else self.violation,
            "queries": "" if self.queries is None else self.queries,
            "error": self.error or "",
        }


@dataclass(frozen=True)
class BatteryReport:
    mode: str
    horizon: int
    budget: int
    entries: List[BatteryEntry]
    caveat: str = FINITE_BATTERY_CAVEAT

    @property
    def all_consistent(self) -> bool:
        return all(e.consistent for e in self.entries)

    def rows(self):
        for e in self.entries:
            yield {"mode": self.mode, "budget": self.budget, **e.row()}


def _check_bounds(horizon, budget):
    if horizon < 1 or budget < 1:
        raise ParameterError("horizon and budget must be >= 1")


def _entry(pi, desc, a, horizon, budget, queries=None):
    try:
        dom, bad = _assess(desc, image_set(pi, a), horizon, budget)
    except Exception as exc:  # reported per entry, the battery carries on
        return BatteryEntry(pi.label, desc.label, None, None,
                            queries() if queries else None, f"{type(exc).__name__}: {exc}")
    return BatteryEntry(pi.label, desc.label, dom, bad, queries() if queries else None)


def permutation_battery(f: PartialDescription, a: BitSequence,
                        perms: Sequence[ComputablePermutation],
                        horizon: int, budget: int) -> BatteryReport:
    """Transport one description through each permutation (strong mode).

    For each ``pi`` the description ``f o pi^-1`` is checked against
    ``pi(A)`` and its domain density measured.
    """
    if not perms:
        raise ParameterError("permutation battery needs at least one permutation")
    _check_bounds(horizon, budget)
    entries = [_entry(pi, describe_under_permutation(f, pi), a, horizon, budget)
               for pi in perms]
    return BatteryReport("strong", horizon, budget, entries)


def weak_mode(pairs: Sequence[Tuple[ComputablePermutation, PartialDescription]],
              a: BitSequence, horizon: int, budget: int) -> BatteryReport:
    """Each permutation brings its own description of ``pi(A)``, with no uniformity."""
    _check_bounds(horizon, budget)
    entries = [_entry(pi, g, a, horizon, budget) for pi, g in pairs]
    return BatteryReport("weak", horizon, budget, entries)


def uniform_family_mode(builder: Callable[[int], PartialDescription],
                        permutation_programs: Sequence[Tuple[int, ComputablePermutation]],
                        a: BitSequence, horizon: int, budget: int) -> BatteryReport:
    """Descriptions ``f_e = builder(e)`` indexed by the permutation's program number."""
    _check_bounds(horizon, budget)
    entries = []
    for e, pi in permutation_programs:
        try:
            g = builder(e)
        except Exception as exc:
            entries.append(BatteryEntry(pi.label, f"builder[{e}]", None, None,
                                        error=f"{type(exc).__name__}: {exc}"))
            continue
        entries.append(_entry(pi, g, a, horizon, budget))
    return BatteryReport("uniform", horizon, budget, entries)


class QueryLimitExceeded(Exception):
    pass


class PermutationOracle:
    """Black-box access to a permutation; counts every query.

    The functional sees only ``forward`` and ``inverse``, never a label or
    program, so two extensionally equal permutations look identical.
    """

    __slots__ = ("_pi", "_limit", "queries")

    def __init__(self, pi: ComputablePermutation, limit: Optional[int] = None):
        self._pi = pi
        self._limit = limit
        self.queries = 0

    def _tick(self):
        self.queries += 1
        if self._limit is not None and self.queries > self._limit:
            raise QueryLimitExceeded(f"more than {self._limit} oracle queries")

    def forward(self, n: int) -> int:
        self._tick()
        return self._pi.forward(n)

    def inverse(self, n: int) -> int:
        self._tick()
        return self._pi.inverse(n)


def oracle_mode(functional: Callable[[PermutationOracle], PartialDescription],
                perms: Sequence[ComputablePermutation], a: BitSequence,
                horizon: int, budget: int) -> BatteryReport:
    """Descriptions built from oracle access alone; at most ``budget*horizon`` queries each."""
    _check_bounds(horizon, budget)
    entries = []
    for pi in perms:
        oracle = PermutationOracle(pi, limit=budget * horizon)
        try:
            g = functional(oracle)
        except Exception as exc:
            entries.append(BatteryEntry(pi.label, "functional", None, None, oracle.queries,
                                        f"{type(exc).__name__}: {exc}"))
            continue
        entries.append(_entry(pi, g, a, horizon, budget, lambda o=oracle: o.queries))
    return BatteryReport("oracle", horizon, budget, entries)


def inverting_functional(a: BitSequence) -> Callable[[PermutationOracle], PartialDescription]:
    """Functional answering ``a(pi^-1(n))`` with one inverse query per evaluation."""

    def functional(oracle):
        return PartialDescription(lambda n, t: a(oracle.inverse(n)), f"oracle-invert:{a.label}")

    return functional


# -- halting-triviality census -------------------------------------------------

@lru_cache(maxsize=1 << 16)
def classify_core(core_code: int, budget: int, x: int = 0) -> str:
    """"halting", "diverging" (exact state revisit) or "undecided" on input ``x``."""
    status, _, _ = _execute(decode_core(core_code), x, budget, watch_states=True)
    return {"halted": "halting", "loop": "diverging", "pending": "undecided"}[status]


@dataclass(frozen=True)
class CensusReport:
    horizon: int
    budget: int
    halting: int
    diverging: int
    undecided: int

    def __post_init__(self):
        if self.halting + self.diverging + self.undecided != self.horizon:
            raise ConstructionBugError("census counts do not partition the horizon")

    @property
    def decided_density(self) -> Fraction:
        return Fraction(self.halting + self.diverging, self.horizon)

    def rows(self):
        d = self.decided_density
        yield {"horizon": self.horizon, "budget": self.budget, "halting": self.halting,
               "diverging": self.diverging, "undecided": self.undecided,
               "decided_density_num": d.numerator, "decided_density_den": d.denominator}


def triviality_census(horizon: int, budget: int) -> CensusReport:
    """Classify programs ``0 .. horizon-1`` on input 0.

    Programs sharing a core behave identically, so each core is run once.
    """
    if horizon < 1 or budget < 1:
        raise ParameterError("horizon and budget must be >= 1")
    tally = {"halting": 0, "diverging": 0, "undecided": 0}
    for n in range(horizon):
        tally[classify_core(core_of(n), budget)] += 1
    return CensusReport(horizon, budget, **tally)


# -- dyadic classes and the adversary permutation --------------------------------

def dyadic_index(n: int) -> Optional[Tuple[int, int]]:
    """``(e, j)`` with ``n = 2^(e+1) * (2j+1)``, ``e >= -1``; ``None`` for 0.

    ``e = -1`` is the odd class R_0; ``e >= 0`` is the class R_{e+1}.
    """
    if n < 0:
        raise ParameterError("dyadic_index takes a natural")
    if n == 0:
        return None
    v = (n & -n).bit_length() - 1
    return v - 1, (n >> v) // 2


def dyadic_target(e: int, j: int) -> int:
    return (2 * j + 1) << (e + 1)


def _is_demanded(code):
    c, pad = unpair(code)
    if pad == 0:
        return None
    e, i = unpair(pad - 1)
    return (e, i) if core_of(e) == c else None


class _Adversary:
    """Targets ``2^(e+1)(2j+1)`` take ``x_{e,j+1}``; waste fills ``{0}`` and the odds.

    Processing targets by increasing ``n`` and giving each the least unused
    ``x_{e,i}`` (``i >= 1``) hands the j-th target of class e the code
    ``x_{e,j+1}``, since the padded families are disjoint.  The waste list is
    extended by a single writer under a lock.
    """

    def __init__(self):
        self._waste: List[int] = []
        self._scanned = 0
        self._lock = threading.Lock()

    def _extend(self, until_index=None, until_code=None):
        with self._lock:
            while ((until_index is not None and len(self._waste) <= until_index)
                   or (until_code is not None and self._scanned <= until_code)):
                x = self._scanned
                if _is_demanded(x) is None:
                    self._waste.append(x)
                self._scanned += 1

    def inverse(self, n):
        d = dyadic_index(n)
        if d is None or d[0] == -1:
            j = 0 if n == 0 else (n + 1) // 2
            self._extend(until_index=j)
            return self._waste[j]
        e, j = d
        return padding_enumeration(e, j + 1)

    def forward(self, x):
        dem = _is_demanded(x)
        if dem is not None:
            e, i = dem
            return dyadic_target(e, i)
        self._extend(until_code=x)
        r = bisect.bisect_left(self._waste, x)
        if r >= len(self._waste) or self._waste[r] != x:
            raise ConstructionBugError(f"code {x} neither demanded nor in the waste list")
        return 0 if r == 0 else 2 * r - 1


def adversary_permutation() -> ComputablePermutation:
    """Bijection with ``pi^-1(R_{e+1})`` inside the padded codes of ``e``.

    Every code listed as ``x_{e,i}`` (``i >= 1``) with matching core lands
    in R_{e+1}; everything else, including all pad-0 codes, fills
    ``{0}`` and R_0 in increasing order.
    """
    adv = _Adversary()
    return ComputablePermutation(adv.forward, adv.inverse, "adversary")


def halting_index_set(steps: int = 256) -> Callable[[int], int]:
    """``S(x) = 1`` iff the core of ``x`` halts on input 0 within ``steps``.

    Membership depends only on the core, so S is closed under padding.
    """

    def member(code):
        return 1 if classify_core(core_of(code), steps) == "halting" else 0

    return member


def brute_force_halting(e: int, steps: int = 256) -> int:
    """Ground truth for :func:`halting_index_set`: run program ``e`` directly."""
    return 1 if isinstance(run(enumerate_program(e), 0, steps), Halted) else 0


def forced_divergence_set() -> BitSequence:
    """``{2^(e+1)(2j+1) : j < e}``: density 0, finitely many points in each R_{e+1}."""

    def ev(n):
        d = dyadic_index(n)
        return 0 if d is None or d[0] < 0 else int(d[1] < d[0])

    return BitSequence(ev, kind="closed-form", label="forced-divergence",
                       known_density=Fraction(0))


def index_set_test_double(member: Callable[[int], int], pi: ComputablePermutation,
                          cost: int = 257,
                          diverge: Optional[BitSequence] = None) -> PartialDescription:
    """A description of ``pi(S)`` that is pending on ``diverge`` and below ``cost``."""
    diverge = forced_divergence_set() if diverge is None else diverge

    def ev(k, t):
        if t < cost or diverge(k):
            return None
        return member(pi.inverse(k))

    return PartialDescription(ev, f"psi[{pi.label}]")


@dataclass(frozen=True)
class Decision:
    bit: int
    k: int  # the member of R_{e+1} whose value was read
    budget: int
    evaluations: int


def decide_from_generic(psi: PartialDescription, e: int, budgets: Iterable[int],
                        width: int = 8, growth: int = 4) -> Decision:
    """Read ``S(e)`` off a description of ``pi(S)``.

    Stage ``s`` tries the first ``width * growth^s`` members of R_{e+1} at
    the s-th budget.  Any converged value there equals ``S(e)`` because the
    preimage under the adversary is a padded copy of ``e``.
    """
    if e < 0:
        raise ParameterError("e must be a natural")
    budgets = [int(b) for b in budgets]
    if not budgets or any(b < 1 for b in budgets):
        raise ParameterError("budget schedule must be nonempty and positive")
    evaluations = 0
    window = width
    for t in budgets:
        for j in range(window):
            k = dyadic_target(e, j)
            evaluations += 1
            v = psi.evaluate(k, t)
            if v is not None:
                return Decision(v, k, t, evaluations)
        window *= growth
    raise DecisionTimeout(
        f"no convergence on R_{e + 1} within budgets {budgets} ({evaluations} evaluations)")
