from fractions import Fraction

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from germlab.offspring import OffspringDist, parse_dist
from germlab.orders import (
    HIERARCHY,
    AlphaInvalid,
    NotGermLess,
    PgfCrossing,
    Relation,
    certify_alpha,
    compare,
    compare_germ,
    compare_icv,
    compare_pgf,
    compare_st,
    germ_threshold,
    lattice_maximal,
)
from strategies import dists

GRID = [Fraction(i, 200) for i in range(201)]


def _tail(d, k):
    return sum((m for n, m in d.weights if n >= k), Fraction(0))


def _direction(pairs):
    """Relation from pointwise (mu-value, nu-value) pairs where Less means mu <= nu."""
    le = all(a <= b for a, b in pairs)
    ge = all(a >= b for a, b in pairs)
    if le and ge:
        return Relation.EQUAL
    if le:
        return Relation.LESS
    if ge:
        return Relation.GREATER
    return Relation.INCOMPARABLE


@given(dists(), dists())
def test_st_against_tail_probabilities(mu, nu):
    top = max(mu.max_outcome, nu.max_outcome)
    expect = _direction([(_tail(mu, k), _tail(nu, k)) for k in range(top + 2)])
    assert compare_st(mu, nu).relation is expect


@given(dists(), dists())
def test_icv_against_integrated_cdf(mu, nu):
    # mu <=_icv nu iff sum_{j<k} F_mu(j) >= sum_{j<k} F_nu(j) for every k
    top = max(mu.max_outcome, nu.max_outcome, 1)
    pairs = []
    for k in range(1, top + 1):
        a = sum((mu.cdf(j) for j in range(k)), Fraction(0))
        b = sum((nu.cdf(j) for j in range(k)), Fraction(0))
        pairs.append((b, a))
    assert compare_icv(mu, nu).relation is _direction(pairs)


@given(dists(), dists(), st.lists(st.integers(0, 5), min_size=8, max_size=8))
def test_icv_less_implies_concave_expectations(mu, nu, slopes):
    assume(compare_icv(mu, nu).relation is Relation.LESS)
    # increasing concave f on {0..7}: nonincreasing nonnegative increments
    inc = sorted(slopes, reverse=True)
    f = [sum(inc[:k]) for k in range(8)]
    e = lambda d: sum((m * f[n] for n, m in d.weights), Fraction(0))  # noqa: E731
    assert e(mu) <= e(nu)


@given(dists(), dists())
def test_pgf_verdict_against_dense_grid(mu, nu):
    v = compare_pgf(mu, nu)
    diffs = [mu.pgf(t) - nu.pgf(t) for t in GRID]
    if v.relation is Relation.LESS:
        assert all(x >= 0 for x in diffs)
    elif v.relation is Relation.GREATER:
        assert all(x <= 0 for x in diffs)
    elif v.relation is Relation.EQUAL:
        assert mu == nu
    else:
        assert isinstance(v.witness, PgfCrossing) and v.witness.check(mu, nu)
    if any(x > 0 for x in diffs) and any(x < 0 for x in diffs):
        assert v.relation is Relation.INCOMPARABLE


def _sign_near_one(mu, nu):
    signs = []
    for j in range(1, 61):
        t = 1 - Fraction(1, 2**j)
        d = mu.pgf(t) - nu.pgf(t)
        signs.append((d > 0) - (d < 0))
    for j in range(len(signs) - 4):
        if len(set(signs[j:j + 5])) == 1:
            return signs[j]
    return signs[-1]


@given(dists(), dists())
def test_germ_is_the_sign_just_below_one(mu, nu):
    v = compare_germ(mu, nu)
    expect = {1: Relation.LESS, -1: Relation.GREATER, 0: Relation.EQUAL}[_sign_near_one(mu, nu)]
    assert v.relation is expect


@given(dists(), dists())
def test_germ_is_antisymmetric_and_total(mu, nu):
    a, b = compare_germ(mu, nu).relation, compare_germ(nu, mu).relation
    assert b is a.flipped()
    assert a is not Relation.INCOMPARABLE
    assert (a is Relation.EQUAL) == (mu == nu)


@given(dists(), dists())
def test_hierarchy(mu, nu):
    verdicts = [compare(o, mu, nu) for o in HIERARCHY]
    for stronger, weaker in zip(verdicts, verdicts[1:]):
        if stronger.is_less_or_equal:
            assert weaker.is_less_or_equal


@given(dists(), dists())
def test_threshold_is_certified_and_minimal(mu, nu):
    assume(compare_germ(mu, nu).relation is Relation.LESS)
    thr = germ_threshold(mu, nu)
    a = thr.alpha
    assert 0 <= a < 1
    d = mu.pgf - nu.pgf
    assert all(d(a + (1 - a) * t) >= 0 for t in GRID)
    if a > 0:
        if thr.tight:
            assert d(a) == 0
            assert d(a - Fraction(1, 10**9)) < 0 or d(a - Fraction(1, 10**12)) < 0
        else:
            assert thr.root.lo < a and a - thr.root.hi <= Fraction(1, 10**6)
            assert not certify_alpha(mu, nu, thr.root.lo)


def test_shipped_witness_pair():
    mu, nu = parse_dist("{1:1}"), parse_dist("{0:1/4,2:3/4}")
    assert compare_pgf(mu, nu).relation is Relation.INCOMPARABLE
    assert compare_germ(mu, nu).relation is Relation.LESS
    thr = germ_threshold(mu, nu)
    assert thr.alpha == Fraction(1, 3) and thr.tight


def test_threshold_needs_germ_less():
    with pytest.raises(NotGermLess):
        germ_threshold(parse_dist("{2:1}"), parse_dist("{1:1}"))


def test_certify_alpha_edges():
    mu, nu = parse_dist("{1:1}"), parse_dist("{0:1/4,2:3/4}")
    assert certify_alpha(mu, nu, Fraction(1, 3))
    assert not certify_alpha(mu, nu, Fraction(1, 4))
    assert not certify_alpha(mu, nu, 2)


@given(dists())
def test_lattice_law_is_germ_maximal_for_its_mean(d):
    top = lattice_maximal(d.mean)
    assert top.mean == d.mean
    assert compare_germ(d, top).relation in (Relation.LESS, Relation.EQUAL)


def test_unknown_order():
    with pytest.raises(ValueError):
        compare("lex", OffspringDist.atom(1), OffspringDist.atom(2))


def test_alpha_invalid_is_a_value_error():
    assert issubclass(AlphaInvalid, ValueError)
