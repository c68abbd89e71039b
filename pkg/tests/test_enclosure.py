from fractions import Fraction

from hypothesis import given
from hypothesis import strategies as st

from germlab import enclosure as enc

big = st.builds(Fraction, st.integers(0, 2**300), st.integers(1, 2**300))


def _frac(x):
    return x if isinstance(x, (Fraction, int)) else enc._as_fraction(x)


@given(big, big)
def test_directed_rounding_brackets(a, b):
    for op, exact in ((enc.add, a + b), (enc.mul, a * b)):
        lo, hi = op(a, b, False), op(a, b, True)
        assert _frac(lo) <= exact <= _frac(hi)
    lo, hi = enc.sub(a, b, False), enc.sub(a, b, True)
    assert _frac(lo) <= a - b <= _frac(hi)


@given(big, big)
def test_compare_is_exact(a, b):
    x = enc.add(a, 0, False) if a.denominator.bit_length() > enc.EXACT_BITS else a
    assert enc.cmp(x, x) == 0
    assert enc.cmp(a, b) == (a > b) - (a < b)


def test_small_values_stay_rational():
    assert enc.add(Fraction(1, 3), Fraction(1, 6), True) == Fraction(1, 2)
    assert enc.mul(Fraction(0), enc.add(Fraction(1, 3**200), Fraction(1, 7**200), True), True) == 0
    assert enc.tighten(Fraction(1, 2), Fraction(1, 2)) == Fraction(1, 2)


@given(st.lists(st.builds(Fraction, st.integers(0, 10), st.integers(1, 10)), min_size=1, max_size=6),
       st.builds(Fraction, st.integers(0, 10**40), st.integers(10**40, 10**41)))
def test_horner_brackets(coeffs, x):
    exact = sum(c * x**k for k, c in enumerate(coeffs))
    assert _frac(enc.horner(coeffs, x, False)) <= exact <= _frac(enc.horner(coeffs, x, True))
