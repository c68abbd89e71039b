"""Offspring-law orders, local-time recursions and branching Markov simulation."""

__version__ = "0.1.0"

from germlab.offspring import OffspringDist, extinction_probability, format_dist, parse_dist  # noqa: E402
from germlab.orders import (  # noqa: E402
    Relation,
    compare,
    compare_germ,
    compare_icv,
    compare_pgf,
    compare_st,
    germ_threshold,
)
from germlab.statespace import (  # noqa: E402
    SpaceTimeSet,
    build_explicit,
    build_lattice,
    build_tree,
    space_time_lift,
)

__all__ = [
    "OffspringDist",
    "Relation",
    "SpaceTimeSet",
    "build_explicit",
    "build_lattice",
    "build_tree",
    "compare",
    "compare_germ",
    "compare_icv",
    "compare_pgf",
    "compare_st",
    "extinction_probability",
    "format_dist",
    "germ_threshold",
    "parse_dist",
    "space_time_lift",
]
