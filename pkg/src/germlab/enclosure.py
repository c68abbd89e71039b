"""Directed-rounding arithmetic mixing exact rationals and binary floats.

A number is either a :class:`Fraction`, kept while its denominator stays
below :data:`EXACT_BITS` bits, or a raw mpmath float with :data:`PRECISION`
mantissa bits and an unbounded exponent. Each operation takes ``up`` to pick
the rounding direction, so a computation repeated with ``up=False`` and
``up=True`` brackets the exact result whenever it is monotone in its
inputs. Only nonnegative operands are rounded; subtraction is used for
margins and rounds its result only.
"""

from __future__ import annotations

from fractions import Fraction

from mpmath.libmp import from_rational, mpf_add, mpf_cmp, mpf_mul, mpf_sub, to_float

__all__ = ["ONE", "ZERO", "add", "as_float", "cmp", "horner", "is_exact", "maximum", "minimum", "mul", "sub",
           "tighten"]

PRECISION = 256
EXACT_BITS = 256

ZERO = Fraction(0)
ONE = Fraction(1)
_Q = (Fraction, int)


def _dir(up: bool) -> str:
    return "c" if up else "f"


def _keep(q: Fraction, up: bool):
    if q.denominator.bit_length() <= EXACT_BITS and q.numerator.bit_length() <= EXACT_BITS:
        return q
    return from_rational(q.numerator, q.denominator, PRECISION, _dir(up))


def _raw(x, up: bool):
    if type(x) in _Q:
        return from_rational(x.numerator, x.denominator, PRECISION, _dir(up))
    return x


def add(a, b, up: bool):
    if type(a) in _Q and type(b) in _Q:
        return _keep(a + b, up)
    return mpf_add(_raw(a, up), _raw(b, up), PRECISION, _dir(up))


def sub(a, b, up: bool):
    if type(a) in _Q and type(b) in _Q:
        return _keep(a - b, up)
    return mpf_sub(_raw(a, up), _raw(b, not up), PRECISION, _dir(up))


def mul(a, b, up: bool):
    if type(a) in _Q and type(b) in _Q:
        return _keep(a * b, up)
    if (type(a) in _Q and a == 0) or (type(b) in _Q and b == 0):
        return ZERO
    return mpf_mul(_raw(a, up), _raw(b, up), PRECISION, _dir(up))


def _as_fraction(x) -> Fraction:
    sign, man, exp, _ = x
    v = Fraction(int(man)) * (Fraction(2) ** exp)
    return -v if sign else v


def cmp(a, b) -> int:
    """Exact three-way comparison."""
    if type(a) in _Q and type(b) in _Q:
        return (a > b) - (a < b)
    if type(a) in _Q:
        return -cmp(b, a)
    if type(b) not in _Q:
        return mpf_cmp(a, b)
    if mpf_cmp(a, _raw(b, False)) < 0:
        return -1
    if mpf_cmp(a, _raw(b, True)) > 0:
        return 1
    # a is squeezed against b, so its exponent is moderate
    return cmp(_as_fraction(a), b)


def maximum(a, b):
    return a if cmp(a, b) >= 0 else b


def minimum(a, b):
    return a if cmp(a, b) <= 0 else b


def tighten(lo, hi):
    """Return an exact rational when the enclosure ``[lo, hi]`` is a point
    of moderate size, else None."""
    if type(lo) in _Q and type(hi) in _Q:
        return lo if lo == hi else None
    if cmp(lo, hi) != 0:
        return None
    x = lo if type(lo) not in _Q else hi
    if x[1] == 0:
        return ZERO
    if abs(x[2]) > 4 * PRECISION:
        return None
    return _as_fraction(x)


def as_float(x) -> float:
    if type(x) in _Q:
        return float(x)
    return to_float(x, rnd="n")


def is_exact(x) -> bool:
    return type(x) in _Q


def horner(coeffs, x, up: bool):
    """Evaluate ``sum coeffs[k] x**k`` (nonnegative coefficients and x)."""
    acc = coeffs[-1]
    for c in reversed(coeffs[:-1]):
        acc = add(mul(acc, x, up), c, up)
    return acc

