from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from densitylab.construct import OscillationSchedule, build_prescribed_density
from densitylab.density import (
    count_members,
    density_profile,
    estimate_limits,
    geometric_schedule,
    next_member,
    partial_density,
)
from densitylab.errors import ParameterError
from densitylab.seqcore import combine, prefix, standard_set

unit_rationals = st.fractions(min_value=0, max_value=1, max_denominator=40)


@st.composite
def target_pairs(draw):
    a, b = sorted([draw(unit_rationals), draw(unit_rationals)])
    return a, b


def test_half_is_alternating():
    s = build_prescribed_density(Fraction(1, 2), Fraction(1, 2))
    assert prefix(s, 10) == "0101010101"
    for k in range(1, 200):
        assert partial_density(s, 2 * k).value == Fraction(1, 2)


@pytest.mark.parametrize("d, base", [((0, 0), "squares")])
def test_zero_zero_is_squares(d, base):
    s = build_prescribed_density(*d)
    assert prefix(s, 5000) == prefix(standard_set(base), 5000)


def test_one_one_is_square_complement():
    s = build_prescribed_density(1, 1)
    sq = prefix(standard_set("squares"), 5000)
    assert prefix(s, 5000) == "".join("0" if c == "1" else "1" for c in sq)


def test_third_two_thirds_estimates():
    s = build_prescribed_density(Fraction(1, 3), Fraction(2, 3))
    est = estimate_limits(density_profile(s, geometric_schedule(2 ** 20)))
    assert 0.31 <= est.lower_est <= 0.36
    assert 0.63 <= est.upper_est <= 0.69


@pytest.mark.parametrize("lower, upper", [
    (Fraction(2, 3), Fraction(1, 3)), (Fraction(-1, 3), Fraction(1, 3)),
    (Fraction(1, 3), Fraction(4, 3)),
])
def test_rejects_bad_targets(lower, upper):
    with pytest.raises(ParameterError):
        build_prescribed_density(lower, upper)


def test_rejects_floats():
    with pytest.raises(ParameterError):
        build_prescribed_density(0.25, 0.5)


def test_schedule_type_invariants():
    with pytest.raises(ParameterError):
        OscillationSchedule([0, 5, 5], [Fraction(1, 2)] * 2, Fraction(2))
    with pytest.raises(ParameterError):
        OscillationSchedule([0, 5], [Fraction(3, 2)], Fraction(2))


def test_quarter_brute_force_oracle():
    s = build_prescribed_density(Fraction(1, 4), Fraction(1, 4))
    bits = np.array([int(c) for c in prefix(s, 10 ** 4)])
    counts = np.concatenate([[0], np.cumsum(bits)])
    for n in range(10 ** 4 + 1):
        assert counts[n] in (n // 4, -(-n // 4))


@given(st.fractions(min_value=0, max_value=1, max_denominator=60).filter(lambda d: 0 < d < 1),
       st.integers(0, 10 ** 6))
def test_beatty_discrepancy(d, n):
    s = build_prescribed_density(d, d)
    assert abs(count_members(s, n) - n * d) < 1
    small = n % 3000
    assert count_members(s, small) == int(s.block(0, small).sum())


@given(target_pairs())
def test_phases_terminate_and_hit_targets(pair):
    lower, upper = pair
    if lower == upper:
        return
    s = build_prescribed_density(lower, upper)
    sched = s.schedule(1 << 14)
    assert len(sched.boundaries) >= 2
    for phase, (b, t) in enumerate(zip(sched.boundaries[1:], sched.targets)):
        rho = partial_density(s, b).value
        prev = partial_density(s, b - 1).value if b > 1 else None
        if phase % 2 == 0:
            # ones phase stops at the first n with rho_n >= target
            assert rho >= t and (prev is None or b - 1 == sched.boundaries[phase] or prev < t)
        else:
            assert rho <= t and (b - 1 == sched.boundaries[phase] or prev > t)


@given(target_pairs(), st.integers(0, 20000))
def test_infinite_and_coinfinite(pair, start):
    s = build_prescribed_density(*pair)
    horizon = 1 << 22
    assert next_member(s, start, horizon) is not None
    assert next_member(combine("complement", s), start, horizon) is not None


@given(target_pairs())
def test_bits_match_counter(pair):
    s = build_prescribed_density(*pair)
    bits = s.block(0, 3000)
    counts = np.concatenate([[0], np.cumsum(bits)])
    for n in range(0, 3001, 61):
        assert count_members(s, n) == counts[n]
    assert [s(k) for k in range(0, 3000, 7)] == bits[::7].tolist()


def test_exact_endpoints_use_converging_targets():
    s = build_prescribed_density(0, 1)
    sched = s.schedule(1 << 16)
    ups, downs = sched.targets[0::2], sched.targets[1::2]
    assert all(b > a for a, b in zip(ups, ups[1:])) and all(t < 1 for t in ups)
    assert all(b < a for a, b in zip(downs, downs[1:])) and all(t > 0 for t in downs)


def test_growth_exceeds_one():
    s = build_prescribed_density(Fraction(1, 3), Fraction(2, 3))
    sched = s.schedule(1 << 18)
    assert sched.growth > 1
    assert sched.boundaries[:6] == [0, 1, 3, 6, 12, 24]
