import math
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st

from germlab.offspring import (
    DistributionError,
    OffspringDist,
    as_dist,
    extinction_probability,
    format_dist,
    is_supercritical,
    moments,
    parse_dist,
    pgf_eval,
    random_dist,
)
from germlab.simulate import simulate_batch
from germlab.statespace import build_explicit
from strategies import dists, fractions


def test_literal_round_trip():
    d = parse_dist("{0:1/4,2:3/4}")
    assert d.pmf(0) == Fraction(1, 4) and d.pmf(2) == Fraction(3, 4) and d.pmf(1) == 0
    assert format_dist(d) == "{0:1/4,2:3/4}"
    assert parse_dist("{ 0 : 0.1 , 1 : 0.9 }").pmf(0) == Fraction(1, 10)


@pytest.mark.parametrize("bad", ["0:1", "{}", "{0:1/2}", "{0:1/2,0:1/2}", "{-1:1}", "{0:x}", "{0:3/2,1:-1/2}"])
def test_malformed_literals(bad):
    with pytest.raises(DistributionError):
        parse_dist(bad)


@given(dists())
def test_format_parse_inverse(d):
    assert parse_dist(format_dist(d)) == d
    assert as_dist(format_dist(d)) == d


@given(dists(), fractions())
def test_pgf_matches_definition(d, t):
    assert pgf_eval(d, t) == sum((m * t**k for k, m in d.weights), Fraction(0))
    assert pgf_eval(d, 1) == 1


@given(dists(), st.integers(1, 6))
def test_factorial_moments_through_stirling_numbers(d, k_max):
    # raw moment k = sum_j S(k, j) * factorial moment j
    raw, fact = moments(d, k_max)
    for k in range(1, k_max + 1):
        expect = sum(int(sympy.functions.combinatorial.numbers.stirling(k, j)) * fact[j - 1]
                     for j in range(1, k + 1))
        assert raw[k - 1] == expect


@given(dists())
def test_factorial_moments_are_pgf_derivatives_at_one(d):
    _, fact = moments(d, 3)
    p = d.pgf
    for k in range(1, 4):
        p = p.derivative()
        assert p(1) == fact[k - 1]


def test_extinction_examples():
    assert extinction_probability(parse_dist("{0:1/4,2:3/4}")).q == Fraction(1, 3)
    assert extinction_probability(parse_dist("{0:1/2,2:1/2}")).q == 1
    assert extinction_probability(parse_dist("{1:1/2,2:1/2}")).q == 0
    r = extinction_probability(parse_dist("{1:1}"))
    assert r.q == 1 and r.degenerate
    golden = extinction_probability(parse_dist("{0:1/2,3:1/2}"))
    assert not golden.exact and golden.q == pytest.approx((math.sqrt(5) - 1) / 2, abs=1e-12)


@given(dists())
def test_extinction_is_smallest_fixed_point(d):
    r = extinction_probability(d)
    if not is_supercritical(d):
        assert r.q == 1
        return
    s = sympy.Symbol("s")
    poly = sum(sympy.Rational(m.numerator, m.denominator) * s**k for k, m in d.weights) - s
    fixed = [x for x in sympy.real_roots(sympy.Poly(poly, s)) if 0 <= x <= 1]
    smallest = min(fixed)
    if r.exact:
        assert sympy.Rational(r.q.numerator, r.q.denominator) == smallest
    else:
        assert abs(r.q - float(smallest)) < 1e-12


def test_random_dist_respects_limits():
    rng = np.random.default_rng(0)
    for _ in range(200):
        d = random_dist(rng)
        assert d.max_outcome <= 7 and len(d.weights) <= 8
        assert all(m.denominator <= 20 for _, m in d.weights)
        assert sum(m for _, m in d.weights) == 1


def test_extinction_frequency_matches_fixed_point():
    point = build_explicit([("x", [("x", 1)])])
    d = parse_dist("{0:1/4,2:3/4}")
    res = simulate_batch(point, d, "x", 200, 4000, seed=3, cap=200)
    freq = (res.extinct_at >= 0).mean()
    se = math.sqrt(freq * (1 - freq) / 4000)
    assert abs(freq - 1 / 3) < 4 * se


def test_offspring_law_rejects_bad_masses():
    with pytest.raises(DistributionError):
        OffspringDist({0: Fraction(1, 2), 1: Fraction(1, 3)})
