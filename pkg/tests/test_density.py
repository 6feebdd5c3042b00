import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from densitylab.density import (
    DensityProfile,
    PartialDensity,
    count_members,
    density_profile,
    estimate_limits,
    factorial_array_witnesses,
    finite_partition_bound,
    geometric_schedule,
    linear_domination_check,
    partial_density,
    principal_function,
    upper_density_checkpoints,
)
from densitylab.errors import InsufficientMembersError, ParameterError
from densitylab.construct import build_prescribed_density
from densitylab.seqcore import combine, prefix, prng_sequence, standard_set, table_sequence

LIBRARY = [
    ("evens",), ("odds",), ("squares",), ("tower",), ("primes",), ("factorial_gaps",),
    ("all",), ("empty",), ("arithmetic", 3, 0), ("arithmetic", 5, 2), ("dyadic", 0),
    ("dyadic", 3),
]

library_sets = st.sampled_from(LIBRARY).map(lambda t: standard_set(*t))
any_sets = st.one_of(library_sets, st.integers(0, 2 ** 32).map(prng_sequence))


def naive_principal(s, n):
    # least x with at least n members below x, by walking the prefix
    seen = 0
    for x in range(1, 10 ** 6):
        seen += s(x - 1)
        if seen >= n:
            return x
    raise AssertionError("not found")


# -- partial_density / profile --

@pytest.mark.parametrize("s, n, expected", [
    (standard_set("evens"), 10, Fraction(5, 10)),
    (standard_set("dyadic", 1), 16, Fraction(4, 16)),
    (standard_set("empty"), 37, Fraction(0)),
])
def test_partial_density_examples(s, n, expected):
    assert partial_density(s, n).value == expected


def test_partial_density_rejects_zero():
    with pytest.raises(ParameterError):
        partial_density(standard_set("evens"), 0)


def test_partial_density_fields_are_exact():
    pd = partial_density(standard_set("evens"), 10)
    assert (pd.count, pd.horizon) == (5, 10)
    assert isinstance(pd.value, Fraction)


@pytest.mark.parametrize("count, horizon", [(-1, 5), (6, 5), (0, 0)])
def test_partial_density_validation(count, horizon):
    with pytest.raises(ParameterError):
        PartialDensity(count, horizon)


def test_profile_examples():
    p = density_profile(standard_set("evens"), [2, 4, 8])
    assert [v.value for v in p.values] == [Fraction(1, 2)] * 3
    assert density_profile(standard_set("squares"), [16]).values[0].value == Fraction(4, 16)
    rho = density_profile(prng_sequence(42), [10 ** 6]).values[0]
    assert 0.498 <= float(rho) <= 0.502


@pytest.mark.parametrize("schedule", [[4, 2], [], [0, 3], [2, 2]])
def test_profile_rejects_bad_schedules(schedule):
    with pytest.raises(ParameterError):
        density_profile(standard_set("evens"), schedule)


def test_profile_rows_columns():
    rows = list(density_profile(standard_set("evens"), [2, 3]).rows())
    assert rows[1] == {"checkpoint": 3, "count": 2, "density_exact_num": 2,
                       "density_exact_den": 3, "density_float": 2 / 3}


def test_geometric_schedule_shape():
    sched = geometric_schedule(100)
    assert sched[:5] == [1, 2, 3, 4, 5]
    assert sched[-1] == 100
    assert all(b > a for a, b in zip(sched, sched[1:]))
    # ceil((11/10)^k) computed exactly
    assert 26 in sched and math.ceil(Fraction(11, 10) ** 34) in sched


@pytest.mark.parametrize("to, ratio", [(0, Fraction(2)), (10, Fraction(1)), (10, Fraction(1, 2))])
def test_geometric_schedule_rejects(to, ratio):
    with pytest.raises(ParameterError):
        geometric_schedule(to, ratio)


def test_estimate_limits_examples():
    const = DensityProfile([1, 2, 3], [PartialDensity(1, 2), PartialDensity(2, 4), PartialDensity(3, 6)])
    assert estimate_limits(const) == (Fraction(1, 2), Fraction(1, 2))
    # strictly decreasing values: min is the last, max the first tail value
    vals = [PartialDensity(c, 10) for c in (9, 8, 7, 6, 5, 4)]
    dec = DensityProfile(list(range(1, 7)), vals)
    assert estimate_limits(dec) == (Fraction(4, 10), Fraction(6, 10))


def test_estimate_limits_needs_two_points():
    with pytest.raises(ParameterError):
        estimate_limits(DensityProfile([1], [PartialDensity(1, 1)]))


def test_profile_invariants_enforced():
    with pytest.raises(ParameterError):
        DensityProfile([1, 2], [PartialDensity(1, 1)])
    with pytest.raises(ParameterError):
        DensityProfile([2, 1], [PartialDensity(1, 2), PartialDensity(1, 1)])
    with pytest.raises(ParameterError):
        DensityProfile([1], [PartialDensity(1, 1)], tail_window=Fraction(0))


# -- principal function --

def test_principal_function_examples():
    sq = principal_function(standard_set("squares"), 4)
    assert [sq[n] for n in range(1, 5)] == [1, 2, 5, 10]
    ev = principal_function(standard_set("evens"), 50)
    assert all(ev[n] == 2 * n - 1 for n in range(1, 51))
    om = principal_function(standard_set("all"), 50)
    assert all(om[n] == n for n in range(1, 51))
    with pytest.raises(IndexError):
        sq[0]


def test_principal_function_insufficient_members():
    with pytest.raises(InsufficientMembersError) as info:
        principal_function(standard_set("squares"), 20, search_horizon=100)
    assert info.value.achieved == 10
    with pytest.raises(InsufficientMembersError) as info:
        principal_function(table_sequence([0, 1, 1, 0]), 3, search_horizon=4)
    assert info.value.achieved == 2


@pytest.mark.parametrize("s, n, expected", [
    (standard_set("squares"), 3, (5, Fraction(3, 5))),
    (standard_set("evens"), 4, (7, Fraction(4, 7))),
    (standard_set("all"), 9, (9, Fraction(1))),
])
def test_upper_density_checkpoint_examples(s, n, expected):
    pairs = upper_density_checkpoints(s, n)
    got_n, pd = pairs[-1]
    assert got_n == n and (pd.horizon, pd.value) == expected


@given(any_sets.filter(lambda s: s.label not in ("empty",)), st.integers(1, 300))
def test_principal_table_matches_mu_definition(s, n_max):
    assume(count_members(s, 1 << 20) >= n_max)
    table = principal_function(s, n_max)
    assert all(b > a for a, b in zip(table.entries, table.entries[1:]))
    for n in (1, n_max, (n_max + 1) // 2):
        p = table[n]
        assert count_members(s, p) >= n and count_members(s, p - 1) < n
    assert table[n_max] == naive_principal(s, n_max)


@pytest.mark.parametrize("token", [("squares",), ("evens",), ("tower",), ("primes",)])
def test_principal_identity(token):
    s = standard_set(*token)
    n_max = 5 if token == ("tower",) else 500
    for n, pd in upper_density_checkpoints(s, n_max):
        assert pd.value * pd.horizon == n


def test_principal_identity_tower_closed_form():
    # members 2^(2^k) need no scan; 20 members fit below 2^(2^20)
    pairs = upper_density_checkpoints(standard_set("tower"), 20, search_horizon=1 << (1 << 20))
    assert all(pd.value * pd.horizon == n for n, pd in pairs)
    assert pairs[-1][1].horizon == 2 ** (2 ** 19) + 1
    with pytest.raises(InsufficientMembersError) as info:
        upper_density_checkpoints(standard_set("tower"), 21, search_horizon=1 << (1 << 20))
    assert info.value.achieved == 20


def test_principal_identity_on_prescribed():
    s = build_prescribed_density(Fraction(1, 3), Fraction(2, 3))
    for n, pd in upper_density_checkpoints(s, 1000):
        assert pd.value * pd.horizon == n


# -- domination --

def test_domination_squares():
    (rep,) = linear_domination_check(standard_set("squares"), [10], 1000)
    # closed form p(n) = (n-1)^2 + 1; solve (n-1)^2 + 1 <= 10n
    last = max(n for n in range(1, 1001) if (n - 1) ** 2 + 1 <= 10 * n)
    assert rep.last_crossing == last == 11
    assert rep.dominated_from == 12


def test_domination_evens_never():
    (rep,) = linear_domination_check(standard_set("evens"), [3], 500)
    assert rep.last_crossing == 500 and rep.dominated_from is None


def test_domination_tower():
    # p(n) = 2^(2^(n-1)) + 1 enumerated directly: 3, 5, 17, 257, 65537, ...
    p = [2 ** (2 ** (n - 1)) + 1 for n in range(1, 11)]
    last = max(n for n in range(1, 11) if p[n - 1] <= 100 * n)
    (rep,) = linear_domination_check(standard_set("tower"), [100], 10)
    assert rep.last_crossing == last == 4
    assert rep.dominated_from == 5


def test_domination_needs_certificate():
    with pytest.raises(InsufficientMembersError):
        linear_domination_check(standard_set("tower"), [10 ** 6], 100)
    with pytest.raises(ParameterError):
        linear_domination_check(standard_set("evens"), [0], 10)


# -- factorial array --

def test_factorial_witnesses_tower():
    got = dict(factorial_array_witnesses(standard_set("tower"), 6))
    # tower elements below 7! are 2, 4, 16, 256; intervals [n!, (n+1)!) missing them
    tower = [2, 4, 16, 256, 65536]
    expected = [n for n in range(2, 7)
                if not any(math.factorial(n) <= t < math.factorial(n + 1) for t in tower)]
    assert sorted(got) == expected == [4, 6]
    assert got[4].value == Fraction(3, 120)
    assert got[6].value == Fraction(4, 5040)
    for n, pd in got.items():
        assert pd.value <= Fraction(1, n)


def test_factorial_witnesses_evens_empty():
    assert factorial_array_witnesses(standard_set("evens"), 10) == []


def test_factorial_witnesses_limit():
    with pytest.raises(ParameterError):
        factorial_array_witnesses(standard_set("tower"), 13)


# -- partition bound --

def test_partition_examples():
    pb = finite_partition_bound(standard_set("arithmetic", 6, 1), 3, 600)
    assert [r.count for r in pb.residues] == [0, 100, 0] and pb.argmax == 1
    pb = finite_partition_bound(standard_set("evens"), 2, 100)
    assert [r.value for r in pb.residues] == [Fraction(1, 2), Fraction(0)]
    pb = finite_partition_bound(prng_sequence(42), 4, 10 ** 5)
    rho = float(pb.total)
    assert all(abs(float(r) - rho / 4) <= 0.01 for r in pb.residues)


@given(any_sets, st.integers(2, 12), st.integers(1, 5000))
def test_partition_sums_exactly(s, m, horizon):
    pb = finite_partition_bound(s, m, horizon)
    assert sum(r.value for r in pb.residues) == pb.total.value == partial_density(s, horizon).value


def test_partition_rejects():
    with pytest.raises(ParameterError):
        finite_partition_bound(standard_set("evens"), 1, 10)


# -- invariants --

@given(any_sets, st.integers(1, 20000))
def test_density_in_unit_interval(s, n):
    assert 0 <= partial_density(s, n).value <= 1


@given(any_sets, any_sets, st.integers(1, 5000))
def test_subadditivity(a, b, n):
    u = partial_density(combine("union", a, b), n).value
    assert u <= partial_density(a, n).value + partial_density(b, n).value
    disjoint_b = combine("intersect", b, combine("complement", a))
    assert (partial_density(combine("union", a, disjoint_b), n).value
            == partial_density(a, n).value + partial_density(disjoint_b, n).value)


@given(any_sets, any_sets, st.integers(1, 5000))
def test_monotonicity(a, b, n):
    sub = combine("intersect", a, b)
    assert partial_density(sub, n).value <= partial_density(a, n).value


@given(any_sets, st.integers(1, 20000))
def test_complement_sums_to_one(s, n):
    assert partial_density(s, n).value + partial_density(combine("complement", s), n).value == 1


@pytest.mark.parametrize("token", LIBRARY)
def test_brute_force_bit_count(token):
    s = standard_set(*token)
    bits = prefix(s, 10 ** 4)
    running = 0
    for n in range(1, 10 ** 4 + 1):
        running += bits[n - 1] == "1"
        if n % 97 == 0 or n == 10 ** 4:
            assert partial_density(s, n).count == running


def test_brute_force_bit_count_prng():
    s = prng_sequence(5)
    counts = np.cumsum([int(c) for c in prefix(s, 10 ** 4)])
    for n in range(1, 10 ** 4 + 1, 113):
        assert partial_density(s, n).count == counts[n - 1]
