"""Exact decision procedures for four stochastic orders on offspring laws.

Orders implemented, from strongest to weakest:

* ``st``  - standard stochastic dominance, via the CDFs;
* ``icv`` - increasing concave order, via ``E[min(X, k)]`` for every cutoff;
* ``pgf`` - ``P_mu >= P_nu`` on all of [0, 1] (smaller law, larger pgf);
* ``germ`` - ``P_mu >= P_nu`` on some interval [1 - eps, 1].

All verdicts are exact: polynomial signs are settled with Sturm sequences
over the rationals and never by floating point.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from germlab.offspring import OffspringDist, moments
from germlab.poly import Poly, RootInterval, rational_root, refine, sign_pattern

__all__ = [
    "AlphaInvalid",
    "CdfCrossing",
    "GermThreshold",
    "NotGermLess",
    "OrderVerdict",
    "PgfCrossing",
    "Relation",
    "certify_alpha",
    "compare",
    "compare_germ",
    "compare_icv",
    "compare_pgf",
    "compare_st",
    "germ_threshold",
    "lattice_maximal",
    "pgf_difference",
]

#: Denominator used when a threshold root is irrational and must be rounded up.
ALPHA_DENOMINATOR = 10**6


class NotGermLess(ValueError):
    """``mu`` is not strictly below ``nu`` in the germ order."""


class AlphaInvalid(ValueError):
    """A supplied clamp level does not satisfy ``P_mu >= P_nu`` on [alpha, 1]."""


class Relation(enum.Enum):
    LESS = "Less"
    GREATER = "Greater"
    EQUAL = "Equal"
    INCOMPARABLE = "Incomparable"

    def flipped(self) -> "Relation":
        return {Relation.LESS: Relation.GREATER, Relation.GREATER: Relation.LESS}.get(self, self)

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class CdfCrossing:
    """Two cutoffs where a pair of monotone functionals disagree in direction.

    ``mu_above`` is a cutoff where the ``mu`` functional strictly exceeds the
    ``nu`` one, ``nu_above`` one where the reverse holds.
    """

    mu_above: int
    nu_above: int

    def __str__(self) -> str:
        return f"mu above at {self.mu_above}; nu above at {self.nu_above}"


@dataclass(frozen=True)
class PgfCrossing:
    """Certificate that ``D = P_mu - P_nu`` changes sign on [0, 1].

    ``D(t_neg) < 0 < D(t_pos)``, and ``root`` isolates a sign change lying
    between the two points.
    """

    root: RootInterval
    t_neg: Fraction
    t_pos: Fraction

    @property
    def t(self) -> Fraction:
        return self.root.midpoint()

    def check(self, mu: OffspringDist, nu: OffspringDist) -> bool:
        d = pgf_difference(mu, nu)
        return d(self.t_neg) < 0 < d(self.t_pos)

    def __str__(self) -> str:
        r = self.root
        where = f"root {r.lo}" if r.exact else f"root in ({r.lo}, {r.hi})"
        return f"P_mu - P_nu < 0 at {self.t_neg}, > 0 at {self.t_pos}; {where}"


@dataclass(frozen=True)
class OrderVerdict:
    relation: Relation
    witness: object = None

    @property
    def is_less_or_equal(self) -> bool:
        return self.relation in (Relation.LESS, Relation.EQUAL)

    def __str__(self) -> str:
        return str(self.relation)


@dataclass(frozen=True)
class GermThreshold:
    """Clamp level ``alpha`` with ``P_mu >= P_nu`` on [alpha, 1].

    ``tight`` is set when ``alpha`` is itself the infimum of valid levels (an
    exact rational root of the difference). ``root`` keeps the isolating
    interval of that infimum when it had to be rounded up.
    """

    alpha: Fraction
    tight: bool
    root: RootInterval | None = None


def pgf_difference(mu: OffspringDist, nu: OffspringDist) -> Poly:
    return mu.pgf - nu.pgf


def _directional(values_mu, values_nu, cutoffs, le: bool) -> OrderVerdict:
    """Combine pointwise comparisons of two functionals into a verdict.

    With ``le`` the relation "mu below nu" means ``mu-functional <= nu-functional``
    pointwise; otherwise it means ``>=`` (used for CDFs).
    """
    mu_above = nu_above = None
    for k, a, b in zip(cutoffs, values_mu, values_nu):
        if a > b and mu_above is None:
            mu_above = k
        elif a < b and nu_above is None:
            nu_above = k
    if mu_above is None and nu_above is None:
        return OrderVerdict(Relation.EQUAL)
    if mu_above is not None and nu_above is not None:
        return OrderVerdict(Relation.INCOMPARABLE, CdfCrossing(mu_above, nu_above))
    mu_smaller = (mu_above is None) if le else (nu_above is None)
    return OrderVerdict(Relation.LESS if mu_smaller else Relation.GREATER)


def compare_st(mu: OffspringDist, nu: OffspringDist) -> OrderVerdict:
    """Standard stochastic order: ``mu <= nu`` iff ``F_mu >= F_nu`` everywhere."""
    top = max(mu.max_outcome, nu.max_outcome)
    ks = range(top + 1)
    return _directional([mu.cdf(k) for k in ks], [nu.cdf(k) for k in ks], ks, le=False)


def truncated_means(dist: OffspringDist, top: int) -> list[Fraction]:
    """``E[min(X, k)]`` for k = 1..top."""
    return [sum((min(n, k) * m for n, m in dist.weights), Fraction(0)) for k in range(1, top + 1)]


def compare_icv(mu: OffspringDist, nu: OffspringDist) -> OrderVerdict:
    """Increasing concave order.

    On {0, ..., N} every increasing concave function is a constant plus a
    nonnegative combination of ``x -> min(x, k)``, so comparing the truncated
    means for k = 1..N decides the order exactly.
    """
    top = max(mu.max_outcome, nu.max_outcome, 1)
    ks = range(1, top + 1)
    return _directional(truncated_means(mu, top), truncated_means(nu, top), ks, le=True)


def compare_pgf(mu: OffspringDist, nu: OffspringDist) -> OrderVerdict:
    """Pgf (Laplace transform) order, decided by the exact sign pattern of
    ``P_mu - P_nu`` on [0, 1]."""
    d = pgf_difference(mu, nu)
    if d.is_zero():
        return OrderVerdict(Relation.EQUAL)
    pattern = sign_pattern(d, 0, 1)
    if pattern.nonnegative():
        return OrderVerdict(Relation.LESS)
    if pattern.nonpositive():
        return OrderVerdict(Relation.GREATER)
    # consecutive gaps are separated by exactly one root, so some adjacent
    # pair has opposite strict signs and the root between them is a crossing
    for (t0, s0), (t1, s1) in zip(pattern.gaps, pattern.gaps[1:]):
        if s0 * s1 < 0:
            root = next(r for r in pattern.roots if t0 <= r.lo and r.hi <= t1)
            root = rational_root(d, root)
            if not root.exact:
                root = refine(d, root, Fraction(1, 10**9))
            t_neg, t_pos = (t0, t1) if s0 < 0 else (t1, t0)
            return OrderVerdict(Relation.INCOMPARABLE, PgfCrossing(root, t_neg, t_pos))
    raise AssertionError("mixed signs without a crossing root")


def factorial_moment_profile(mu: OffspringDist, nu: OffspringDist) -> tuple[int, Fraction, Fraction] | None:
    """First index where factorial moments differ, with both values, or None."""
    top = max(mu.max_outcome, nu.max_outcome)
    if top == 0:
        return None
    _, fm = moments(mu, top)
    _, fn = moments(nu, top)
    for k, (a, b) in enumerate(zip(fm, fn), start=1):
        if a != b:
            return k, a, b
    return None


def compare_germ(mu: OffspringDist, nu: OffspringDist) -> OrderVerdict:
    """Germ order by the alternating lexicographic rule on factorial moments.

    Taylor expansion of the pgf difference at 1 gives
    ``D(1 - e) = sum_k (f_k(mu) - f_k(nu)) (-e)**k / k!``, so the sign near 1
    is ``(-1)**k * (f_k(mu) - f_k(nu))`` at the first index k where the
    factorial moments differ. Distinct finite-support laws always differ at
    some k no larger than the top of the joint support, so the germ order is
    total here. The witness is that index.
    """
    prof = factorial_moment_profile(mu, nu)
    if prof is None:
        return OrderVerdict(Relation.EQUAL)
    k, a, b = prof
    sign = (-1) ** k * (a - b)
    return OrderVerdict(Relation.LESS if sign > 0 else Relation.GREATER, k)


COMPARATORS: dict[str, Callable[[OffspringDist, OffspringDist], OrderVerdict]] = {
    "st": compare_st,
    "icv": compare_icv,
    "pgf": compare_pgf,
    "germ": compare_germ,
}

#: Strongest first; Less at one level implies Less-or-Equal at every later one.
HIERARCHY = ("st", "icv", "pgf", "germ")


def compare(order: str, mu: OffspringDist, nu: OffspringDist) -> OrderVerdict:
    try:
        return COMPARATORS[order](mu, nu)
    except KeyError:
        raise ValueError(f"unknown order {order!r}; expected one of {sorted(COMPARATORS)}") from None


def _round_up(x: Fraction, den: int) -> Fraction:
    return Fraction(math.ceil(x * den), den)


def certify_alpha(mu: OffspringDist, nu: OffspringDist, alpha) -> bool:
    """True iff ``P_mu(t) >= P_nu(t)`` for every t in [alpha, 1]."""
    alpha = Fraction(alpha)
    if not 0 <= alpha <= 1:
        return False
    d = pgf_difference(mu, nu)
    if d.is_zero():
        return True
    return sign_pattern(d, alpha, 1).nonnegative()


def germ_threshold(mu: OffspringDist, nu: OffspringDist) -> GermThreshold:
    """Smallest level ``alpha`` with ``P_mu >= P_nu`` on [alpha, 1].

    ``alpha`` is the right end of the last stretch of [0, 1) where the pgf
    difference is negative (0 when there is none). An irrational end is
    rounded up to a multiple of ``1/ALPHA_DENOMINATOR`` (finer if that would
    reach 1) and the rounded level is re-certified.
    """
    if compare_germ(mu, nu).relation is not Relation.LESS:
        raise NotGermLess(f"{mu} is not germ-less than {nu}")
    d = pgf_difference(mu, nu)
    pattern = sign_pattern(d, 0, 1)
    last_neg = max((i for i, (_, s) in enumerate(pattern.gaps) if s < 0), default=None)
    if last_neg is None:
        return GermThreshold(Fraction(0), tight=False)
    sample = pattern.gaps[last_neg][0]
    root = next(r for r in pattern.roots if r.lo >= sample)
    root = rational_root(d, root)
    if root.exact:
        alpha, tight = root.lo, True
    else:
        den = ALPHA_DENOMINATOR
        while True:
            root = refine(d, root, Fraction(1, 100 * den))
            alpha = _round_up(root.hi, den)
            if alpha < 1:
                break
            den *= 10
        tight = False
    if not certify_alpha(mu, nu, alpha):
        raise AssertionError(f"germ threshold {alpha} failed re-certification")
    return GermThreshold(alpha, tight, None if tight else root)


def lattice_maximal(mean: Fraction) -> OffspringDist:
    """The law on {floor(m), ceil(m)} with mean ``m``, maximal in the germ order."""
    mean = Fraction(mean)
    lo = math.floor(mean)
    frac = mean - lo
    if frac == 0:
        return OffspringDist.atom(lo)
    return OffspringDist({lo: 1 - frac, lo + 1: frac})
