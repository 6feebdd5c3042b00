"""Text tokens naming sets, injections, permutations and descriptions.

Tokens are what the command line accepts; every parser raises
:class:`TokenError` carrying the grammar on failure.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, List, Optional, Tuple

from .construct import build_prescribed_density
from .errors import ParameterError
from .genericcase import (
    PartialDescription,
    adversary_permutation,
    avoiding_description,
    never_description,
    total_description,
)
from .permute import (
    ComputableInjection,
    ComputablePermutation,
    block_shuffle,
    compose,
    density_shift,
    identity,
    injection,
    injection_to_permutation,
    invert,
    orbit_permutation,
    swap_adjacent,
)
from .seqcore import BitSequence, combine, prng_sequence, standard_set

SET_GRAMMAR = """set tokens:
  evens | odds | squares | tower | primes | factorial_gaps | all | empty
  arithmetic:<m>:<i>     members km+i, 0 <= i < m
  dyadic:<e>             members 2^e * odd
  prng:<seed>            seeded pseudo-random set
  prescribed:<lo>:<hi>   lower/upper density, exact rationals such as 1/3
  ~<set>                 complement"""

INJECTION_GRAMMAR = """injection tokens:
  identity | triangular | swap | affine:<a>:<b> | power:<k>"""

PERMUTATION_GRAMMAR = """permutation tokens:
  identity | swap | adversary
  blockshuffle:<seed>
  orbit:<set>:<set>             k-th member to k-th member, same for non-members
  shift:<set>:<lo>:<hi>         orbit onto a prescribed-density set
  inj2perm:<injection>
  compose:<perm>,<perm>         apply the second first
  invert:<perm>"""

DESCRIPTION_GRAMMAR = """description tokens (relative to --set):
  total | never | avoid:<set>"""


class TokenError(ParameterError):
    """A token that does not parse; the message includes the grammar."""

    def __init__(self, token: str, grammar: str, reason: str = ""):
        detail = f" ({reason})" if reason else ""
        super().__init__(f"cannot parse token {token!r}{detail}\n{grammar}")
        self.token = token


def _nat(text: str) -> int:
    if not text.isdigit():
        raise ValueError(f"{text!r} is not a natural number")
    return int(text)


def _rational(text: str) -> Fraction:
    if "." in text or "e" in text.lower():
        raise ValueError("densities must be written as exact rationals like 1/3")
    return Fraction(text)


def parse_set(token: str) -> BitSequence:
    try:
        return _parse_set(token)
    except TokenError:
        raise
    except (ValueError, ZeroDivisionError) as exc:
        raise TokenError(token, SET_GRAMMAR, str(exc)) from None


def _parse_set(token):
    if token.startswith("~"):
        return combine("complement", parse_set(token[1:]))
    head, *rest = token.split(":")
    if head in ("evens", "odds", "squares", "tower", "primes", "factorial_gaps", "all", "empty") \
            and not rest:
        return standard_set(head)
    if head == "arithmetic" and len(rest) == 2:
        return standard_set("arithmetic", _nat(rest[0]), _nat(rest[1]))
    if head == "dyadic" and len(rest) == 1:
        return standard_set("dyadic", _nat(rest[0]))
    if head == "prng" and len(rest) == 1:
        return prng_sequence(_nat(rest[0]))
    if head == "prescribed" and len(rest) == 2:
        return build_prescribed_density(_rational(rest[0]), _rational(rest[1]))
    raise TokenError(token, SET_GRAMMAR)


def parse_injection(token: str) -> ComputableInjection:
    head, *rest = token.split(":")
    try:
        return injection(head, *(_nat(x) for x in rest))
    except ValueError as exc:
        raise TokenError(token, INJECTION_GRAMMAR, str(exc)) from None


def _split_two(token, sep, left, right):
    """Every way of reading ``token`` as ``left sep right``; must be unique."""
    parts = token.split(sep)
    found = []
    for cut in range(1, len(parts)):
        try:
            found.append((left(sep.join(parts[:cut])), right(sep.join(parts[cut:]))))
        except ParameterError:
            continue
    if len(found) != 1:
        reason = "no valid split" if not found else "ambiguous split"
        raise TokenError(token, PERMUTATION_GRAMMAR, reason)
    return found[0]


def parse_permutation(token: str) -> ComputablePermutation:
    head, _, body = token.partition(":")
    try:
        if head == "identity" and not body:
            return identity()
        if head == "swap" and not body:
            return swap_adjacent()
        if head == "adversary" and not body:
            return adversary_permutation()
        if head == "blockshuffle" and body:
            return block_shuffle(_nat(body))
        if head == "orbit" and body:
            a, b = _split_two(body, ":", parse_set, parse_set)
            return orbit_permutation(a, b)
        if head == "shift" and body:
            parts = body.rsplit(":", 2)
            if len(parts) == 3:
                return density_shift(parse_set(parts[0]), _rational(parts[1]),
                                     _rational(parts[2]))
        if head == "inj2perm" and body:
            return injection_to_permutation(parse_injection(body))
        if head == "compose" and body:
            outer, inner = _split_two(body, ",", parse_permutation, parse_permutation)
            return compose(outer, inner)
        if head == "invert" and body:
            return invert(parse_permutation(body))
    except TokenError:
        raise
    except (ValueError, ZeroDivisionError) as exc:
        raise TokenError(token, PERMUTATION_GRAMMAR, str(exc)) from None
    raise TokenError(token, PERMUTATION_GRAMMAR)


def parse_permutation_list(text: str) -> List[ComputablePermutation]:
    """Comma-separated permutations; ``compose:`` arguments may hold commas too."""
    parts = text.split(",")
    out, i = [], 0
    while i < len(parts):
        for j in range(i + 1, len(parts) + 1):
            try:
                out.append(parse_permutation(",".join(parts[i:j])))
                i = j
                break
            except ParameterError:
                continue
        else:
            raise TokenError(parts[i], PERMUTATION_GRAMMAR)
    return out


def parse_description(token: str, a: BitSequence) -> PartialDescription:
    head, _, body = token.partition(":")
    if head == "total" and not body:
        return total_description(a)
    if head == "never" and not body:
        return never_description()
    if head == "avoid" and body:
        return avoiding_description(a, parse_set(body))
    raise TokenError(token, DESCRIPTION_GRAMMAR)


# numbered permutation programs for the uniform mode
LIBRARY_PERMUTATIONS: Tuple[str, ...] = (
    "identity",
    "swap",
    "blockshuffle:7",
    "orbit:squares:evens",
    "orbit:evens:odds",
    "inj2perm:affine:2:0",
    "compose:swap,blockshuffle:3",
)


def indexed_library() -> List[Tuple[int, ComputablePermutation]]:
    return [(e, parse_permutation(tok)) for e, tok in enumerate(LIBRARY_PERMUTATIONS)]


def pre_inverting_builder(a: BitSequence) -> Callable[[int], PartialDescription]:
    """``e -> (n -> a(pi_e^-1(n)))`` with ``pi_e`` the e-th library permutation."""
    cache: dict = {}

    def build(e: int) -> PartialDescription:
        if not 0 <= e < len(LIBRARY_PERMUTATIONS):
            raise ParameterError(f"no library permutation with index {e}")
        pi = cache.get(e)
        if pi is None:
            pi = cache[e] = parse_permutation(LIBRARY_PERMUTATIONS[e])
        return PartialDescription(lambda n, t: a(pi.inverse(n)), f"f_{e}:{a.label}")

    return build


def describe_token(kind: str) -> Optional[str]:
    return {"set": SET_GRAMMAR, "injection": INJECTION_GRAMMAR,
            "permutation": PERMUTATION_GRAMMAR, "description": DESCRIPTION_GRAMMAR}.get(kind)
