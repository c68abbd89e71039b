from fractions import Fraction

import sympy
from hypothesis import given
from hypothesis import strategies as st

from germlab.poly import Poly, count_roots, gcd, isolate_roots, rational_root, sign_pattern, squarefree

coeffs = st.lists(st.integers(-6, 6), min_size=2, max_size=7).filter(lambda c: any(c[1:]))


def _sympy_roots(c, lo, hi):
    x = sympy.Symbol("x")
    p = sympy.Poly(list(reversed(c)), x)
    return [r for r in sympy.real_roots(p) if lo <= r <= hi]


def test_arithmetic_against_hand_values():
    p = Poly([1, 2]) * Poly([-1, 1])  # (1 + 2x)(x - 1) = -1 - x + 2x^2
    assert p == Poly([-1, -1, 2])
    assert p(Fraction(1, 2)) == Fraction(-1)
    q, r = divmod(p, Poly([-1, 1]))
    assert q == Poly([1, 2]) and r.is_zero()
    assert Poly([0, 0, 1]).compose(Poly([1, 1])) == Poly([1, 2, 1])


@given(coeffs)
def test_root_count_matches_sympy(c):
    p = Poly(c)
    distinct = {r for r in _sympy_roots(c, 0, 1) if r > 0}
    assert count_roots(p, 0, 1) == len(distinct)


@given(coeffs)
def test_isolation_brackets_every_root_once(c):
    p = Poly(c)
    roots = sorted(set(_sympy_roots(c, 0, 1)))
    found = isolate_roots(p, 0, 1)
    assert len(found) == len(roots)
    for iv, r in zip(found, roots):
        if iv.exact:
            assert r == sympy.Rational(iv.lo.numerator, iv.lo.denominator)
        else:
            assert iv.lo < r < iv.hi


@given(st.integers(1, 9), st.integers(1, 9), coeffs)
def test_rational_roots_are_recovered_exactly(a, b, c):
    r = Fraction(min(a, b), max(a, b) + 1)
    p = Poly([-r.numerator, r.denominator]) * Poly(c)
    hits = [iv for iv in isolate_roots(p, 0, 1) if iv.lo <= r <= iv.hi]
    assert len(hits) == 1
    assert rational_root(p, hits[0]).lo == r


@given(coeffs)
def test_sign_pattern_agrees_with_dense_grid(c):
    p = Poly(c)
    pat = sign_pattern(p, 0, 1)
    grid = [Fraction(i, 97) for i in range(98)]
    if pat.nonnegative():
        assert all(p(t) >= 0 for t in grid)
    if pat.nonpositive():
        assert all(p(t) <= 0 for t in grid)


@given(coeffs, coeffs)
def test_gcd_divides_both(a, b):
    g = gcd(Poly(a), Poly(b))
    assert (Poly(a) % g).is_zero() and (Poly(b) % g).is_zero()
    sf = squarefree(Poly(a) * Poly(a))
    assert (Poly(a) % sf).is_zero() or Poly(a).degree == 0
