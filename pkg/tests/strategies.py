"""Hypothesis strategies shared by the test modules."""

from fractions import Fraction

from hypothesis import strategies as st

from germlab.offspring import OffspringDist


@st.composite
def dists(draw, max_outcome: int = 7, max_support: int = 8, max_weight: int = 6):
    outcomes = draw(st.lists(st.integers(0, max_outcome), min_size=1,
                             max_size=min(max_support, max_outcome + 1), unique=True))
    weights = draw(st.lists(st.integers(1, max_weight), min_size=len(outcomes), max_size=len(outcomes)))
    total = sum(weights)
    return OffspringDist({k: Fraction(w, total) for k, w in zip(outcomes, weights)})


@st.composite
def supercritical(draw, **kw):
    d = draw(dists(**kw))
    if d.mean <= 1:
        d = OffspringDist({k + 2: m for k, m in d.weights})
    return d


def fractions(lo=0, hi=1, max_den=64):
    return st.builds(Fraction, st.integers(0, max_den), st.integers(1, max_den)).filter(
        lambda q: lo <= q <= hi)
