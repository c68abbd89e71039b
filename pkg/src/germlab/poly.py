"""Exact univariate polynomials over the rationals.

Coefficients are stored in ascending order as :class:`fractions.Fraction`.
Besides ring arithmetic this module provides Sturm sequences, real-root
counting and isolation, and sign patterns on an interval, which is all the
order comparators and the extinction solver need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

Number = "int | Fraction"


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


class Poly:
    """Immutable polynomial with rational coefficients, lowest degree first."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable = ()):
        cs = [_frac(c) for c in coeffs]
        while cs and cs[-1] == 0:
            cs.pop()
        self.coeffs: tuple[Fraction, ...] = tuple(cs)

    @classmethod
    def monomial(cls, degree: int, coeff=1) -> "Poly":
        return cls([0] * degree + [coeff])

    @property
    def degree(self) -> int:
        """Degree, with the zero polynomial at -1."""
        return len(self.coeffs) - 1

    @property
    def lead(self) -> Fraction:
        return self.coeffs[-1] if self.coeffs else Fraction(0)

    def is_zero(self) -> bool:
        return not self.coeffs

    def __call__(self, x):
        acc = Fraction(0) if isinstance(x, (int, Fraction)) else 0.0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def __eq__(self, other) -> bool:
        if isinstance(other, Poly):
            return self.coeffs == other.coeffs
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.coeffs)

    def __repr__(self) -> str:
        if not self.coeffs:
            return "Poly(0)"
        terms = [f"{c}*t^{i}" for i, c in enumerate(self.coeffs) if c]
        return "Poly(" + " + ".join(terms) + ")"

    def __neg__(self) -> "Poly":
        return Poly(-c for c in self.coeffs)

    def __add__(self, other: "Poly") -> "Poly":
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (Fraction(0),) * (n - len(self.coeffs))
        b = other.coeffs + (Fraction(0),) * (n - len(other.coeffs))
        return Poly(x + y for x, y in zip(a, b))

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __mul__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            k = _frac(other)
            return Poly(c * k for c in self.coeffs)
        if self.is_zero() or other.is_zero():
            return Poly()
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in enumerate(other.coeffs):
                    out[i + j] += a * b
        return Poly(out)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Poly":
        out = Poly([1])
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def derivative(self) -> "Poly":
        return Poly(i * c for i, c in enumerate(self.coeffs) if i)

    def __divmod__(self, other: "Poly") -> tuple["Poly", "Poly"]:
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        dq = other.degree
        quot = [Fraction(0)] * max(len(rem) - dq, 0)
        inv = 1 / other.lead
        for k in range(len(rem) - dq - 1, -1, -1):
            c = rem[k + dq] * inv
            quot[k] = c
            if c:
                for j, b in enumerate(other.coeffs):
                    rem[k + j] -= c * b
        return Poly(quot), Poly(rem[:dq])

    def __floordiv__(self, other: "Poly") -> "Poly":
        return divmod(self, other)[0]

    def __mod__(self, other: "Poly") -> "Poly":
        return divmod(self, other)[1]

    def monic(self) -> "Poly":
        if self.is_zero():
            return self
        return self * (1 / self.lead)

    def compose(self, inner: "Poly") -> "Poly":
        acc = Poly()
        for c in reversed(self.coeffs):
            acc = acc * inner + Poly([c])
        return acc

    def primitive_integer(self) -> tuple[int, ...]:
        """Integer coefficients of the primitive multiple with positive lead."""
        if self.is_zero():
            return ()
        den = math.lcm(*(c.denominator for c in self.coeffs))
        ints = [int(c * den) for c in self.coeffs]
        g = math.gcd(*ints)
        sign = 1 if ints[-1] > 0 else -1
        return tuple(sign * v // g for v in ints)


def gcd(a: Poly, b: Poly) -> Poly:
    """Monic greatest common divisor (zero if both are zero)."""
    while not b.is_zero():
        a, b = b, a % b
    return a.monic()


def squarefree(p: Poly) -> Poly:
    """Squarefree part ``p / gcd(p, p')``, with the same real roots as ``p``."""
    if p.degree <= 0:
        return p
    return p // gcd(p, p.derivative())


def sturm_sequence(p: Poly) -> list[Poly]:
    """Classical Sturm chain ``p, p', -rem(p_{i-1}, p_i), ...``."""
    if p.is_zero():
        return []
    seq = [p, p.derivative()]
    if seq[-1].is_zero():
        return seq[:1]
    while True:
        r = -(seq[-2] % seq[-1])
        if r.is_zero():
            return seq
        seq.append(r)


def sign_variations(seq: Sequence[Poly], x) -> int:
    """Number of sign changes of ``seq`` evaluated at ``x``, zeros dropped."""
    last = 0
    changes = 0
    for p in seq:
        v = p(x)
        if v == 0:
            continue
        s = 1 if v > 0 else -1
        if last and s != last:
            changes += 1
        last = s
    return changes


def count_roots(p: Poly, lo, hi, seq: Sequence[Poly] | None = None) -> int:
    """Count distinct real roots of ``p`` in the half-open interval (lo, hi]."""
    if p.is_zero():
        raise ValueError("the zero polynomial has infinitely many roots")
    if seq is None:
        seq = sturm_sequence(squarefree(p))
    lo, hi = _frac(lo), _frac(hi)
    if hi <= lo:
        return 0
    return sign_variations(seq, lo) - sign_variations(seq, hi)


@dataclass(frozen=True)
class RootInterval:
    """A rational interval holding exactly one real root.

    When ``lo == hi`` the root is exactly that rational; otherwise the root
    lies strictly inside ``(lo, hi)`` and neither endpoint is a root.
    """

    lo: Fraction
    hi: Fraction

    @property
    def exact(self) -> bool:
        return self.lo == self.hi

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def midpoint(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def __float__(self) -> float:
        return float(self.midpoint())


def _sgn(v) -> int:
    return (v > 0) - (v < 0)


def isolate_roots(p: Poly, lo=0, hi=1) -> list[RootInterval]:
    """Isolate the distinct real roots of ``p`` in the closed interval [lo, hi].

    Bisection driven by Sturm counts. Intervals come back sorted, pairwise
    disjoint, each either exact or with non-root endpoints.
    """
    if p.is_zero():
        raise ValueError("the zero polynomial has infinitely many roots")
    lo, hi = _frac(lo), _frac(hi)
    sf = squarefree(p)
    if sf.degree <= 0:
        return []
    seq = sturm_sequence(sf)
    out: list[RootInterval] = []
    if sf(lo) == 0:
        out.append(RootInterval(lo, lo))
    stack = [(lo, hi, count_roots(sf, lo, hi, seq))]
    found: list[RootInterval] = []
    while stack:
        a, b, n = stack.pop()
        if n == 0:
            continue
        if n == 1:
            if sf(b) == 0:
                found.append(RootInterval(b, b))
            else:
                found.append(_tighten(sf, a, b))
            continue
        m = (a + b) / 2
        stack.append((a, m, count_roots(sf, a, m, seq)))
        stack.append((m, b, count_roots(sf, m, b, seq)))
    out.extend(sorted(found, key=lambda r: r.lo))
    return out


def _tighten(sf: Poly, a: Fraction, b: Fraction) -> RootInterval:
    # single simple root in (a, b), b not a root; make the left end a non-root too
    if sf(a) != 0:
        return RootInterval(a, b)
    sb = _sgn(sf(b))
    while True:
        m = (a + b) / 2
        v = sf(m)
        if v == 0:
            return RootInterval(m, m)
        if _sgn(v) == sb:
            b, sb = m, _sgn(v)
        else:
            return RootInterval(m, b)


def refine(p: Poly, root: RootInterval, width) -> RootInterval:
    """Bisect ``root`` until narrower than ``width`` (or found exactly)."""
    if root.exact:
        return root
    sf = squarefree(p)
    a, b = root.lo, root.hi
    sa = _sgn(sf(a))
    width = _frac(width)
    while b - a >= width:
        m = (a + b) / 2
        v = sf(m)
        if v == 0:
            return RootInterval(m, m)
        if _sgn(v) == sa:
            a = m
        else:
            b = m
    return RootInterval(a, b)


def rational_root(p: Poly, root: RootInterval) -> RootInterval:
    """Return ``root`` as an exact rational when the enclosed root is rational.

    A rational root ``r/s`` of the primitive integer polynomial has ``s``
    dividing its leading coefficient ``c``; two distinct such rationals are at
    least ``1/c**2`` apart, so after refining below ``1/(2c**2)`` the closest
    rational with denominator at most ``c`` is the only candidate.
    """
    if root.exact:
        return root
    sf = squarefree(p)
    c = abs(sf.primitive_integer()[-1])
    narrow = refine(sf, root, Fraction(1, 2 * c * c))
    if narrow.exact:
        return narrow
    cand = narrow.midpoint().limit_denominator(c)
    if narrow.lo < cand < narrow.hi and sf(cand) == 0:
        return RootInterval(cand, cand)
    return narrow


@dataclass(frozen=True)
class SignPattern:
    """Sign of a polynomial on [lo, hi], between consecutive isolated roots.

    ``gaps[i]`` is ``(sample, sign)`` for the open stretch left of
    ``roots[i]`` (the last gap is right of the last root). Stretches of zero
    length (a root sitting on an endpoint) are omitted.
    """

    lo: Fraction
    hi: Fraction
    roots: tuple[RootInterval, ...]
    gaps: tuple[tuple[Fraction, int], ...]

    def nonnegative(self) -> bool:
        return all(s >= 0 for _, s in self.gaps)

    def nonpositive(self) -> bool:
        return all(s <= 0 for _, s in self.gaps)


def sign_pattern(p: Poly, lo=0, hi=1) -> SignPattern:
    """Decide the sign of ``p`` everywhere on [lo, hi] exactly."""
    lo, hi = _frac(lo), _frac(hi)
    if p.is_zero():
        return SignPattern(lo, hi, (), ((lo, 0),))
    roots = isolate_roots(p, lo, hi)
    gaps: list[tuple[Fraction, int]] = []
    left = lo
    left_is_root = False
    for r in roots:
        right = r.lo
        if right > left or (right == left and not r.exact and not left_is_root):
            # r.lo is never itself a root when inexact
            sample = (left + right) / 2 if right > left else right
            gaps.append((sample, _sgn(p(sample))))
        left = r.hi
        left_is_root = r.exact
    if hi > left or not left_is_root:
        sample = (left + hi) / 2 if hi > left else hi
        gaps.append((sample, _sgn(p(sample))))
    return SignPattern(lo, hi, tuple(roots), tuple(gaps))
