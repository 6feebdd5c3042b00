"""Small-horizon invariant checks for every module, run by ``densitylab selfcheck``."""

from __future__ import annotations

import io
import random
import time
from fractions import Fraction
from typing import Callable, List, NamedTuple

import numpy as np

from . import construct, density, genericcase, permute, seqcore, stochastic


class CheckResult(NamedTuple):
    module: str
    name: str
    ok: bool
    seconds: float
    detail: str = ""


_CHECKS: List[tuple] = []


def _check(module: str):
    def wrap(fn: Callable[[], None]):
        _CHECKS.append((module, fn.__name__.lstrip("_"), fn))
        return fn

    return wrap


# -- seqcore --

@_check("seqcore")
def _prefix_determinism():
    a, b = seqcore.prng_sequence(11), seqcore.prng_sequence(11)
    assert seqcore.prefix(a, 4096) == seqcore.prefix(b, 4096)
    assert seqcore.prefix(a, 512) == "".join(str(a(n)) for n in range(512))


@_check("seqcore")
def _complement_involution():
    s = seqcore.standard_set("squares")
    cc = seqcore.combine("complement", seqcore.combine("complement", s))
    assert np.array_equal(cc.block(0, 5000), s.block(0, 5000))


@_check("seqcore")
def _closed_forms_match_scan():
    for tok in (("evens",), ("squares",), ("tower",), ("arithmetic", 5, 2), ("dyadic", 3)):
        s = seqcore.standard_set(*tok)
        bits = s.block(0, 3000)
        counts = np.concatenate([[0], np.cumsum(bits)])
        for n in range(0, 3000, 37):
            assert s.counter(n) == counts[n], (tok, n)
            nxt = s.successor(n)
            hits = np.flatnonzero(bits[n:])
            if hits.size:
                assert nxt == n + hits[0], (tok, n)


# -- density --

@_check("density")
def _principal_identity():
    for s in (seqcore.standard_set("squares"), seqcore.standard_set("evens")):
        for n, pd in density.upper_density_checkpoints(s, 200):
            assert pd.value * pd.horizon == n


@_check("density")
def _profile_counts_nondecreasing():
    p = density.density_profile(seqcore.prng_sequence(3), density.geometric_schedule(10 ** 4))
    counts = [v.count for v in p.values]
    assert counts == sorted(counts)
    est = density.estimate_limits(p)
    assert 0 <= est.lower_est <= est.upper_est <= 1


# -- permute --

@_check("permute")
def _roundtrips():
    for pi in (permute.block_shuffle(5),
               permute.orbit_permutation(seqcore.standard_set("squares"), seqcore.standard_set("evens")),
               genericcase.adversary_permutation()):
        pi.check_roundtrip(2000)
    # non-image values are only placed at square slots, so inverses come late
    permute.injection_to_permutation(permute.injection("affine", 3, 1)).check_roundtrip(300)


@_check("permute")
def _transfer_bound():
    for inj in (permute.injection("affine", 2, 0), permute.injection("triangular")):
        permute.verify_density_transfer(inj, seqcore.prng_sequence(9), 3000)


@_check("permute")
def _orbit_image():
    a, b = seqcore.standard_set("squares"), seqcore.standard_set("primes")
    img = permute.image_set(permute.orbit_permutation(a, b), a)
    assert np.array_equal(img.block(0, 3000), b.block(0, 3000))


# -- construct --

@_check("construct")
def _beatty_discrepancy():
    s = construct.build_prescribed_density(Fraction(2, 7), Fraction(2, 7))
    for n in range(0, 3000):
        assert abs(density.count_members(s, n) - Fraction(2 * n, 7)) < 1


@_check("construct")
def _oscillation_schedule():
    s = construct.build_prescribed_density(Fraction(1, 4), Fraction(3, 4))
    sched = s.schedule(1 << 14)
    assert sched.growth > 1
    for b, t in zip(sched.boundaries[1:], sched.targets):
        v = density.partial_density(s, b).value
        assert v >= t if t >= Fraction(3, 4) else v <= t


# -- stochastic --

@_check("stochastic")
def _thinning_factorization():
    res = stochastic.thinning_experiment(seqcore.standard_set("arithmetic", 3, 0), 5, 20000)
    assert all(cp.factorization_holds for cp in res.checkpoints)


@_check("stochastic")
def _oblivious_selection_bias():
    rep = stochastic.select(stochastic.select_all(), seqcore.standard_set("evens"), 1000)
    assert rep.bias == Fraction(1, 2)


@_check("stochastic")
def _nested_chain():
    res = stochastic.nested_construction((1, 2, 3), 20000)
    final = res.final_set.block(0, 20000)
    for level in res.levels:
        assert not np.any(final & (1 - level.block(0, 20000)))
    for lo, hi in res.intervals:
        assert final[lo:hi].any()


# -- genericcase --

@_check("genericcase")
def _budget_monotone():
    rng = random.Random(0)
    pi = genericcase.adversary_permutation()
    psi = genericcase.index_set_test_double(genericcase.halting_index_set(), pi)
    for _ in range(300):
        n = rng.randrange(1, 1 << 20)
        t = rng.randrange(1, 600)
        v = psi(n, t)
        if v is not None:
            assert psi(n, t + rng.randrange(1, 600)) == v
        prog, x = genericcase.enumerate_program(rng.randrange(5000)), rng.randrange(5)
        r = genericcase.run(prog, x, t)
        if isinstance(r, genericcase.Halted):
            assert genericcase.run(prog, x, t + rng.randrange(1, 600)) == r


@_check("genericcase")
def _pad_invariance():
    rng = random.Random(1)
    for _ in range(200):
        c, x, t = rng.randrange(3000), rng.randrange(6), rng.randrange(1, 80)
        r0 = genericcase.run(genericcase.enumerate_program(genericcase.encode(c, 0)), x, t)
        r1 = genericcase.run(genericcase.enumerate_program(genericcase.encode(c, rng.randrange(1, 99))), x, t)
        assert r0 == r1


@_check("genericcase")
def _census_partition():
    r = genericcase.triviality_census(2000, 50)
    assert r.halting + r.diverging + r.undecided == 2000


@_check("genericcase")
def _adversary_cores():
    pi = genericcase.adversary_permutation()
    for e in range(8):
        for j in range(4):
            x = pi.inverse(genericcase.dyadic_target(e, j))
            assert genericcase.core_of(x) == genericcase.core_of(e)


@_check("genericcase")
def _decide_matches_brute_force():
    pi = genericcase.adversary_permutation()
    psi = genericcase.index_set_test_double(genericcase.halting_index_set(256), pi)
    for e in range(20):
        d = genericcase.decide_from_generic(psi, e, [10, 100, 1000])
        assert d.bit == genericcase.brute_force_halting(e, 256)


@_check("genericcase")
def _dyadic_partition():
    for n in range(1, 1 << 12):
        e, j = genericcase.dyadic_index(n)
        assert genericcase.dyadic_target(e, j) == n


# -- cli --

@_check("cli")
def _csv_determinism():
    from .cli import emit_csv

    rows = list(density.density_profile(seqcore.standard_set("evens"), range(1, 9)).rows())
    a, b = io.StringIO(), io.StringIO()
    emit_csv(rows, a)
    emit_csv(rows, b)
    assert a.getvalue() == b.getvalue() and "\r" not in a.getvalue()


def modules_covered() -> set:
    return {m for m, _, _ in _CHECKS}


def run_selfcheck() -> List[CheckResult]:
    out = []
    for module, name, fn in _CHECKS:
        t0 = time.perf_counter()
        try:
            fn()
            out.append(CheckResult(module, name, True, time.perf_counter() - t0))
        except Exception as exc:  # every failure becomes a report line
            out.append(CheckResult(module, name, False, time.perf_counter() - t0,
                                   f"{type(exc).__name__}: {exc}"))
    return out
