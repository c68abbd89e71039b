"""Finite-support offspring distributions with exact rational weights."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from germlab.poly import Poly, isolate_roots, rational_root, refine

__all__ = [
    "DistributionError",
    "ExtinctionResult",
    "OffspringDist",
    "extinction_probability",
    "is_supercritical",
    "moments",
    "parse_dist",
    "pgf_eval",
]

#: Above this degree the extinction solver skips Sturm isolation.
STURM_DEGREE_CAP = 64
BISECTION_TOL = 1e-12


class DistributionError(ValueError):
    """Raised for malformed distributions or out-of-domain arguments."""


def _to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        # repr gives the shortest round-tripping decimal, so 0.1 -> 1/10
        return Fraction(repr(x))
    return Fraction(x)


class OffspringDist:
    """Probability measure on {0, 1, 2, ...} with finite support.

    Masses are exact rationals that must sum to one. Instances are immutable
    and hashable; two distributions compare equal iff they are the same
    measure.

    >>> d = OffspringDist({0: "1/4", 2: "3/4"})
    >>> d.mean
    Fraction(3, 2)
    """

    def __init__(self, weights: Mapping[int, object] | Iterable[tuple[int, object]]):
        items = weights.items() if isinstance(weights, Mapping) else weights
        acc: dict[int, Fraction] = {}
        for k, m in items:
            if isinstance(k, bool) or int(k) != k or int(k) < 0:
                raise DistributionError(f"outcome {k!r} is not a nonnegative integer")
            try:
                mass = _to_fraction(m)
            except (TypeError, ValueError, ZeroDivisionError) as exc:
                raise DistributionError(f"mass {m!r} for outcome {k} is not a rational") from exc
            if mass < 0:
                raise DistributionError(f"negative mass {mass} at outcome {k}")
            acc[int(k)] = acc.get(int(k), Fraction(0)) + mass
        pairs = tuple(sorted((k, m) for k, m in acc.items() if m != 0))
        if not pairs:
            raise DistributionError("distribution has empty support")
        total = sum(m for _, m in pairs)
        if total != 1:
            raise DistributionError(f"masses sum to {total}, not 1")
        self._weights = pairs

    @classmethod
    def atom(cls, k: int) -> "OffspringDist":
        return cls({k: 1})

    @classmethod
    def parse(cls, text: str) -> "OffspringDist":
        return parse_dist(text)

    @property
    def weights(self) -> tuple[tuple[int, Fraction], ...]:
        return self._weights

    @property
    def outcomes(self) -> tuple[int, ...]:
        return tuple(k for k, _ in self._weights)

    @property
    def max_outcome(self) -> int:
        return self._weights[-1][0]

    def pmf(self, k: int) -> Fraction:
        for j, m in self._weights:
            if j == k:
                return m
        return Fraction(0)

    def cdf(self, k: int) -> Fraction:
        return sum((m for j, m in self._weights if j <= k), Fraction(0))

    def is_atom(self, k: int | None = None) -> bool:
        if len(self._weights) != 1:
            return False
        return k is None or self._weights[0][0] == k

    @cached_property
    def pgf(self) -> Poly:
        coeffs = [Fraction(0)] * (self.max_outcome + 1)
        for k, m in self._weights:
            coeffs[k] = m
        return Poly(coeffs)

    @cached_property
    def pgf_coeffs(self) -> np.ndarray:
        """Float coefficients of the pgf, ascending, for vectorised evaluation."""
        return np.array([float(c) for c in self.pgf.coeffs], dtype=float)

    @cached_property
    def mean(self) -> Fraction:
        return sum((k * m for k, m in self._weights), Fraction(0))

    @cached_property
    def cumulative_float(self) -> np.ndarray:
        """Float CDF over :attr:`outcomes`, last entry forced to exactly 1."""
        cum = np.cumsum([float(m) for _, m in self._weights])
        cum[-1] = 1.0
        return cum

    def __eq__(self, other) -> bool:
        if isinstance(other, OffspringDist):
            return self._weights == other._weights
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self._weights)

    def __repr__(self) -> str:
        return f"OffspringDist({format_dist(self)})"

    def __str__(self) -> str:
        return format_dist(self)


def format_dist(dist: OffspringDist) -> str:
    return "{" + ",".join(f"{k}:{m}" for k, m in dist.weights) + "}"


_PAIR = re.compile(r"^\s*(\d+)\s*:\s*([0-9./eE+-]+)\s*$")


def parse_dist(text: str) -> OffspringDist:
    """Parse the literal ``{0:1/4,2:3/4}``; masses may be ``p/q`` or decimals.

    Decimals are converted exactly (``0.1`` is ``1/10``).
    """
    if not isinstance(text, str):
        raise DistributionError(f"distribution literal must be a string, got {type(text).__name__}")
    body = text.strip()
    if not (body.startswith("{") and body.endswith("}")):
        raise DistributionError(f"distribution literal {text!r} must be wrapped in braces")
    body = body[1:-1].strip()
    if not body:
        raise DistributionError("distribution literal is empty")
    pairs = []
    for chunk in body.split(","):
        m = _PAIR.match(chunk)
        if m is None:
            raise DistributionError(f"cannot parse {chunk.strip()!r} as outcome:mass")
        try:
            mass = Fraction(m.group(2))
        except (ValueError, ZeroDivisionError) as exc:
            raise DistributionError(f"cannot parse mass {m.group(2)!r}") from exc
        pairs.append((int(m.group(1)), mass))
    outcomes = [k for k, _ in pairs]
    if len(set(outcomes)) != len(outcomes):
        raise DistributionError(f"duplicate outcome in {text!r}")
    return OffspringDist(pairs)


def as_dist(obj) -> OffspringDist:
    """Coerce a literal string, mapping or distribution to :class:`OffspringDist`."""
    if isinstance(obj, OffspringDist):
        return obj
    if isinstance(obj, str):
        return parse_dist(obj)
    if isinstance(obj, Mapping):
        return OffspringDist({int(k): v for k, v in obj.items()})
    raise DistributionError(f"cannot interpret {obj!r} as an offspring distribution")


def pgf_eval(dist: OffspringDist, t) -> Fraction:
    """Evaluate the probability generating function exactly at ``t`` in [0, 1]."""
    t = _to_fraction(t)
    if not 0 <= t <= 1:
        raise DistributionError(f"pgf argument {t} outside [0, 1]")
    return dist.pgf(t)


def moments(dist: OffspringDist, k_max: int) -> tuple[list[Fraction], list[Fraction]]:
    """Raw and factorial moments of orders 1..k_max.

    ``raw[k-1] = sum n**k mu(n)``; ``factorial[k-1]`` is the k-th derivative of
    the pgf at 1, ``sum n(n-1)...(n-k+1) mu(n)``.
    """
    if k_max < 1:
        raise DistributionError("k_max must be at least 1")
    raw = [sum((n**k * m for n, m in dist.weights), Fraction(0)) for k in range(1, k_max + 1)]
    fact = [
        sum((math.perm(n, k) * m for n, m in dist.weights), Fraction(0))
        for k in range(1, k_max + 1)
    ]
    return raw, fact


def is_supercritical(dist: OffspringDist) -> bool:
    return dist.mean > 1


@dataclass(frozen=True)
class ExtinctionResult:
    """Smallest fixed point ``q`` of the pgf on [0, 1].

    ``q`` is a :class:`Fraction` when ``exact`` and a float otherwise.
    ``degenerate`` marks the atom at 1, where ``q = 1`` only by convention.
    """

    q: Fraction | float
    exact: bool
    degenerate: bool = False

    @property
    def survival(self):
        return 1 - self.q


def extinction_probability(dist: OffspringDist) -> ExtinctionResult:
    """Extinction probability of the Galton-Watson process with law ``dist``.

    Subcritical and critical laws give exactly 1. Otherwise the unique root of
    ``P(s) - s`` in [0, 1) is isolated with Sturm sequences and promoted to an
    exact rational when it is one; beyond :data:`STURM_DEGREE_CAP` plain
    bisection on the sign of ``P(s) - s`` is used instead.
    """
    if dist.is_atom(1):
        return ExtinctionResult(Fraction(1), exact=True, degenerate=True)
    if not is_supercritical(dist):
        return ExtinctionResult(Fraction(1), exact=True)
    if dist.pmf(0) == 0:
        return ExtinctionResult(Fraction(0), exact=True)
    f = dist.pgf - Poly([0, 1])
    if f.degree <= STURM_DEGREE_CAP:
        roots = [r for r in isolate_roots(f, 0, 1) if r.lo < 1]
        # convexity: exactly one root in [0, 1) when supercritical
        root = rational_root(f, roots[0])
        if root.exact:
            return ExtinctionResult(root.lo, exact=True)
        root = refine(f, root, Fraction(BISECTION_TOL))
        return ExtinctionResult(float(root.midpoint()), exact=False)
    return ExtinctionResult(_bisect_fixed_point(f), exact=False)


def _bisect_fixed_point(f: Poly) -> float:
    # f > 0 on [0, q) and f < 0 on (q, 1) for a supercritical pgf
    coeffs = [float(c) for c in f.coeffs]
    lo, hi = 0.0, 1.0
    while hi - lo > BISECTION_TOL:
        mid = 0.5 * (lo + hi)
        v = 0.0
        for c in reversed(coeffs):
            v = v * mid + c
        if v > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def random_dist(rng: np.random.Generator, max_outcome: int = 7, max_support: int = 8,
                max_denominator: int = 20) -> OffspringDist:
    """Random distribution with small support and small common denominator."""
    size = int(rng.integers(1, min(max_support, max_outcome + 1) + 1))
    outcomes = np.sort(rng.choice(max_outcome + 1, size=size, replace=False))
    den = int(rng.integers(size, max_denominator + 1))
    # random composition of den into `size` positive parts
    cuts = np.sort(rng.choice(np.arange(1, den), size=size - 1, replace=False)) if size > 1 else []
    parts = np.diff(np.concatenate([[0], cuts, [den]]))
    return OffspringDist({int(k): Fraction(int(p), den) for k, p in zip(outcomes, parts)})
