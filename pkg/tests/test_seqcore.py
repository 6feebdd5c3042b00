from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from densitylab.density import partial_density
from densitylab.errors import HorizonError, ParameterError
from densitylab import seqcore
from densitylab.seqcore import combine, prefix, prng_sequence, standard_set, table_sequence

LIBRARY = [
    ("evens",), ("odds",), ("squares",), ("tower",), ("primes",), ("factorial_gaps",),
    ("all",), ("empty",), ("arithmetic", 3, 0), ("arithmetic", 7, 4), ("dyadic", 0),
    ("dyadic", 2),
]

library_sets = st.sampled_from(LIBRARY).map(lambda t: standard_set(*t))
any_sets = st.one_of(library_sets, st.integers(0, 2 ** 64 - 1).map(prng_sequence))


# -- examples --

@pytest.mark.parametrize("token, n, members", [
    (("arithmetic", 3, 0), 12, [0, 3, 6, 9]),
    (("dyadic", 1), 16, [2, 6, 10, 14]),
    (("squares",), 16, [0, 1, 4, 9]),
    (("tower",), 300, [2, 4, 16, 256]),
    (("factorial_gaps",), 30, [2, 3, 4, 5, 24, 25, 26, 27, 28, 29]),
    (("primes",), 30, [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]),
])
def test_standard_set_members(token, n, members):
    assert standard_set(*token).members(n) == members


@pytest.mark.parametrize("token, n, expected", [
    (("arithmetic", 3, 0), 12, Fraction(4, 12)),
    (("dyadic", 1), 16, Fraction(1, 4)),
    (("squares",), 16, Fraction(4, 16)),
])
def test_standard_set_densities(token, n, expected):
    assert partial_density(standard_set(*token), n).value == expected


@pytest.mark.parametrize("name, params", [
    ("arithmetic", (0, 0)), ("arithmetic", (3, 3)), ("arithmetic", (3, -1)),
    ("dyadic", (-1,)), ("nosuch", ()), ("evens", (1,)), ("dyadic", ()),
])
def test_standard_set_rejects(name, params):
    with pytest.raises(ParameterError):
        standard_set(name, *params)


@pytest.mark.parametrize("s, n, expected", [
    (standard_set("evens"), 6, "101010"),
    (standard_set("squares"), 0, ""),
    (standard_set("squares"), 10, "1100100001"),
])
def test_prefix(s, n, expected):
    assert prefix(s, n) == expected


def test_prefix_negative_length():
    with pytest.raises(ParameterError):
        prefix(standard_set("evens"), -1)


def test_combine_examples():
    ev, sq = standard_set("evens"), standard_set("squares")
    assert combine("intersect", ev, sq).members(16) == [0, 4]
    assert partial_density(combine("complement", sq), 16).value == Fraction(12, 16)
    assert combine("intersect", ev, sq).kind == "derived"


@pytest.mark.parametrize("op, args", [
    ("complement", 2), ("intersect", 1), ("union", 1), ("xor", 2),
])
def test_combine_arity(op, args):
    seqs = [standard_set("evens")] * args
    with pytest.raises(ParameterError):
        combine(op, *seqs)


# -- PRNG --

def test_mixer_matches_reference_splitmix64():
    # first two outputs of the reference SplitMix64 generator seeded with 0
    assert seqcore._mix64(seqcore._GOLDEN) == 0xE220A8397B1DCDAF
    assert seqcore._mix64(2 * seqcore._GOLDEN & seqcore._MASK64) == 0x6E789E6AA1B965F4


def test_prng_frozen_prefixes():
    # frozen so that any change to the generator is caught across platforms
    assert prefix(prng_sequence(42), 64) == (
        "1001110010100100011001110101000011100100001111111111101110100001")
    assert prefix(prng_sequence(43), 64) == (
        "0010100110001101000000000111111001001101001101011000111010100000")


def test_prng_seeds_differ_and_kind():
    a, b = prng_sequence(42), prng_sequence(43)
    assert prefix(a, 64) != prefix(b, 64)
    assert a.kind == "prng-backed" and a.label == "prng:42"


def test_prng_density_at_million():
    rho = partial_density(prng_sequence(42), 10 ** 6)
    assert abs(float(rho) - 0.5) <= 0.002


def test_prng_scalar_matches_vector():
    s = prng_sequence(42)
    idx = np.array([0, 1, 5, 1000, 123456789, 2 ** 40], dtype=np.int64)
    assert s.at(idx).tolist() == [s(int(k)) for k in idx]


@pytest.mark.parametrize("seed", [-1, 2 ** 64])
def test_prng_seed_range(seed):
    with pytest.raises(ParameterError):
        prng_sequence(seed)


# -- table-backed --

def test_table_horizon_is_enforced():
    t = table_sequence([1, 0, 1])
    assert prefix(t, 3) == "101"
    with pytest.raises(HorizonError):
        t(3)
    with pytest.raises(HorizonError):
        t.block(0, 4)


def test_negative_index_rejected():
    with pytest.raises(ParameterError):
        standard_set("evens")(-1)


# -- properties --

@given(any_sets, st.integers(0, 3000))
def test_evaluation_is_deterministic(s, n):
    assert s(n) == s(n)
    assert s.at([n])[0] == s(n)


@given(any_sets, st.integers(0, 500))
def test_prefix_extends(s, n):
    assert prefix(s, n + 1)[:n] == prefix(s, n)
    assert prefix(s, n + 1)[n] == str(s(n))


@given(any_sets, st.integers(0, 5000))
def test_complement_involution(s, n):
    cc = combine("complement", combine("complement", s))
    assert cc(n) == s(n)


@given(any_sets, any_sets, any_sets, st.integers(0, 2000))
def test_intersect_union_commutative_associative(a, b, c, n):
    for op in ("intersect", "union"):
        assert combine(op, a, b)(n) == combine(op, b, a)(n)
        assert combine(op, combine(op, a, b), c)(n) == combine(op, a, combine(op, b, c))(n)


@given(any_sets, st.integers(1, 500))
def test_intersect_with_complement_is_empty(a, n):
    assert prefix(combine("intersect", a, combine("complement", a)), n) == "0" * n


@given(st.integers(1, 40), st.data())
def test_arithmetic_density_bound(m, data):
    i = data.draw(st.integers(0, m - 1))
    n = data.draw(st.integers(1, 10 ** 6))
    rho = partial_density(standard_set("arithmetic", m, i), n).value
    assert abs(rho - Fraction(1, m)) <= Fraction(1, n)


@pytest.mark.parametrize("e", range(7))
def test_dyadic_density_bound_exhaustive(e):
    bits = standard_set("dyadic", e).block(0, 2 ** 16)
    counts = np.cumsum(bits, dtype=np.int64)
    n = np.arange(1, 2 ** 16 + 1, dtype=np.int64)
    # |count/n - 2^-(e+1)| <= 2^(e+1)/n  <=>  |count*2^(e+1) - n| <= 4^(e+1)
    assert np.all(np.abs(counts * 2 ** (e + 1) - n) <= 4 ** (e + 1))


@given(library_sets, st.integers(0, 5000))
def test_closed_forms_agree_with_scan(s, n):
    bits = s.block(0, n + 300)
    if s.counter is not None:
        assert s.counter(n) == int(bits[:n].sum())
    if s.successor is not None:
        hits = np.flatnonzero(bits[n:])
        if hits.size:
            assert s.successor(n) == n + int(hits[0])


def test_known_density_is_metadata_only():
    s = standard_set("evens")
    liar = seqcore.BitSequence(s._evaluator, kind="closed-form", label="liar",
                               known_density=Fraction(9, 10), vector=s._vector)
    assert partial_density(liar, 1000).value == Fraction(1, 2)


def test_concurrent_evaluation_is_safe():
    from concurrent.futures import ThreadPoolExecutor

    s = prng_sequence(7)
    expected = s.block(0, 20000)
    with ThreadPoolExecutor(4) as pool:
        parts = list(pool.map(lambda k: s.block(k * 5000, (k + 1) * 5000), range(4)))
    assert np.array_equal(np.concatenate(parts), expected)
