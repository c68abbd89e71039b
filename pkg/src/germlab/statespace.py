"""Countable-state transition kernels truncated to finite windows.

A :class:`Kernel` lists its window states and, for each, the transitions
that stay inside the window. Probability that leaves the window is either
deleted (``kill``) or folded into a self-loop (``reflect``); rows therefore
sum to one or less, and the deficit is the killed mass.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, partial
from typing import Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Boundary",
    "EmbeddingUnavailable",
    "Kernel",
    "MetricUnavailable",
    "NonStochasticRow",
    "SpaceTimeSet",
    "build_explicit",
    "build_lattice",
    "build_tree",
    "kernel_from_spec",
    "set_from_spec",
    "space_time_lift",
]

State = Hashable
_uid = itertools.count()


class NonStochasticRow(ValueError):
    def __init__(self, state, total):
        super().__init__(f"row of state {state!r} sums to {total}, not 1")
        self.state = state
        self.total = total


class MetricUnavailable(ValueError):
    """The kernel carries no graph metric."""


class EmbeddingUnavailable(ValueError):
    """The kernel carries no boundary embedding into [0, 1]."""


class Boundary(str, enum.Enum):
    KILL = "kill"
    REFLECT = "reflect"


class Kernel:
    """Sub-stochastic transition structure on a finite window of states.

    Parameters
    ----------
    states : sequence of hashable labels, in a fixed enumeration order
    rows : mapping from state to a sequence of ``(target, probability)``
        with targets inside the window and exact rational probabilities
    metric : optional graph distance ``metric(x, y)``
    origin : distinguished state (lattice origin, tree root)
    """

    def __init__(self, states: Sequence[State], rows: Mapping[State, Sequence[tuple[State, Fraction]]],
                 *, name: str, boundary: Boundary = Boundary.KILL,
                 metric: Callable[[State, State], int] | None = None,
                 origin: State | None = None, spec: dict | None = None):
        self.states: tuple[State, ...] = tuple(states)
        self.index: dict[State, int] = {s: i for i, s in enumerate(self.states)}
        if len(self.index) != len(self.states):
            raise ValueError("duplicate state labels")
        self._rows = {s: tuple((y, Fraction(p)) for y, p in rows.get(s, ())) for s in self.states}
        for s, row in self._rows.items():
            for y, p in row:
                if y not in self.index:
                    raise ValueError(f"transition {s!r} -> {y!r} leaves the window")
                if p <= 0:
                    raise ValueError(f"nonpositive probability {p} on {s!r} -> {y!r}")
        self.name = name
        self.boundary = Boundary(boundary)
        self._metric = metric
        self.origin = origin
        self.spec = spec or {"kind": name}
        self.uid = next(_uid)

    def __len__(self) -> int:
        return len(self.states)

    def __contains__(self, state) -> bool:
        return state in self.index

    def __repr__(self) -> str:
        return f"Kernel({self.name}, {len(self)} states, boundary={self.boundary.value})"

    def transitions(self, state: State) -> list[tuple[State, Fraction]]:
        try:
            return list(self._rows[state])
        except KeyError:
            raise KeyError(f"state {state!r} is outside the window") from None

    def killed_mass(self, state: State) -> Fraction:
        return 1 - sum((p for _, p in self._rows[state]), Fraction(0))

    def audit(self) -> None:
        """Exact stochasticity audit: every row sums to at most one.

        Raises :class:`NonStochasticRow` for rows summing above one, or below
        one under a reflecting boundary (which must conserve mass).
        """
        for s in self.states:
            total = sum((p for _, p in self._rows[s]), Fraction(0))
            if total > 1 or (self.boundary is Boundary.REFLECT and total != 1):
                raise NonStochasticRow(s, total)

    def metric(self, x: State, y: State) -> int:
        if self._metric is None:
            raise MetricUnavailable(f"kernel {self.name!r} has no graph metric")
        return self._metric(x, y)

    @property
    def has_metric(self) -> bool:
        return self._metric is not None

    def space_label(self, state: State) -> State:
        """Spatial coordinate of a state (identity except on lifted kernels)."""
        return state

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        """Float transition matrix restricted to the window."""
        rows, cols, vals = [], [], []
        for i, s in enumerate(self.states):
            for y, p in self._rows[s]:
                rows.append(i)
                cols.append(self.index[y])
                vals.append(float(p))
        n = len(self.states)
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    @cached_property
    def kill_vector(self) -> np.ndarray:
        return np.array([float(self.killed_mass(s)) for s in self.states])

    @cached_property
    def exact_rows(self) -> tuple[tuple[tuple[int, Fraction], ...], ...]:
        """Rows as ``(target index, probability)`` tuples, for exact engines."""
        return tuple(tuple((self.index[y], p) for y, p in self._rows[s]) for s in self.states)

    @cached_property
    def exact_kill(self) -> tuple[Fraction, ...]:
        return tuple(self.killed_mass(s) for s in self.states)

    @cached_property
    def sampling_table(self) -> tuple[np.ndarray, np.ndarray]:
        """Padded ``(targets, cumulative)`` arrays for inverse-CDF stepping.

        Row i lists target indices in transition order followed by ``-1``
        (killed) padding; ``cumulative[i, j]`` is the exact cumulative
        probability through column j, converted to float, and the last column
        is always 1.0.
        """
        width = max((len(r) for r in self._rows.values()), default=0) + 1
        n = len(self.states)
        targets = np.full((n, width), -1, dtype=np.int64)
        cum = np.ones((n, width), dtype=float)
        for i, s in enumerate(self.states):
            acc = Fraction(0)
            for j, (y, p) in enumerate(self._rows[s]):
                acc += p
                targets[i, j] = self.index[y]
                cum[i, j] = float(acc)
        return targets, cum


# ----------------------------------------------------------------------------
# builders


def _lattice_label(coords: tuple[int, ...]):
    return coords[0] if len(coords) == 1 else coords


def _coords(label) -> tuple[int, ...]:
    return (label,) if isinstance(label, int) else tuple(label)


def build_lattice(d: int, R: int, boundary: Boundary | str = Boundary.KILL) -> Kernel:
    """Simple random walk on Z^d truncated to the l-infinity ball of radius R.

    Labels are plain integers for d = 1 and tuples otherwise.
    """
    if d not in (1, 2, 3):
        raise ValueError(f"lattice dimension must be 1, 2 or 3, got {d}")
    if R < 1:
        raise ValueError(f"radius must be positive, got {R}")
    boundary = Boundary(boundary)
    p = Fraction(1, 2 * d)
    states = [_lattice_label(c) for c in itertools.product(range(-R, R + 1), repeat=d)]
    rows = {}
    for label in states:
        c = _coords(label)
        row: list[tuple[State, Fraction]] = []
        out = Fraction(0)
        for axis in range(d):
            for step in (-1, 1):
                nb = list(c)
                nb[axis] += step
                if abs(nb[axis]) > R:
                    out += p
                else:
                    row.append((_lattice_label(tuple(nb)), p))
        if out and boundary is Boundary.REFLECT:
            row.append((label, out))
        rows[label] = row

    def l1(x, y):
        return sum(abs(a - b) for a, b in zip(_coords(x), _coords(y)))

    origin = _lattice_label((0,) * d)
    spec = {"kind": "lattice", "d": d, "R": R, "boundary": boundary.value}
    return Kernel(states, rows, name=f"lattice(d={d},R={R})", boundary=boundary,
                  metric=l1, origin=origin, spec=spec)


def _tree_distance(x: tuple, y: tuple) -> int:
    common = 0
    for a, b in zip(x, y):
        if a != b:
            break
        common += 1
    return len(x) + len(y) - 2 * common


class TreeKernel(Kernel):
    """Kernel on a ball of the (b+1)-regular tree with a boundary embedding.

    Vertices are child-index paths from the root ``()``; the root has
    children ``0..b`` and every other vertex ``0..b-1``.
    """

    def __init__(self, b: int, R: int, boundary: Boundary):
        self.b = b
        self.depth = R
        states: list[tuple] = [()]
        frontier: list[tuple] = [()]
        for level in range(R):
            nxt = []
            for v in frontier:
                nxt.extend(v + (c,) for c in range(b + 1 if level == 0 else b))
            states.extend(nxt)
            frontier = nxt
        p = Fraction(1, b + 1)
        rows = {}
        for v in states:
            row: list[tuple[State, Fraction]] = []
            if v:
                row.append((v[:-1], p))
            nchild = b + 1 if not v else b
            if len(v) < R:
                row.extend((v + (c,), p) for c in range(nchild))
            elif boundary is Boundary.REFLECT:
                row.append((v, nchild * p))
            rows[v] = row
        spec = {"kind": "tree", "b": b, "R": R, "boundary": boundary.value}
        super().__init__(states, rows, name=f"tree(b={b},R={R})", boundary=boundary,
                         metric=_tree_distance, origin=(), spec=spec)

    def shadow(self, v: tuple) -> tuple[int, int]:
        """Boundary interval ``[i/m, (i+1)/m]`` of the rays through ``v``.

        The first edge picks one of ``b+1`` equal parts of [0, 1] and each
        later edge one of ``b`` equal subparts, so rays map to mixed-radix
        expansions and every depth-j vertex owns a interval of length
        ``1/((b+1) b**(j-1))``.
        """
        if not v:
            return 0, 1
        i = v[0]
        for c in v[1:]:
            i = i * self.b + c
        return i, (self.b + 1) * self.b ** (len(v) - 1)


def build_tree(b: int, R: int, boundary: Boundary | str = Boundary.KILL) -> TreeKernel:
    """Simple random walk on the radius-R ball of the (b+1)-regular tree."""
    if b < 2:
        raise ValueError(f"branching number must be at least 2, got {b}")
    if R < 1:
        raise ValueError(f"depth must be positive, got {R}")
    return TreeKernel(b, R, Boundary(boundary))


def _hashable(label):
    if isinstance(label, list):
        return tuple(_hashable(x) for x in label)
    return label


def build_explicit(table: Iterable[tuple[State, Iterable[tuple[State, object]]]],
                   metric: Callable[[State, State], int] | None = None) -> Kernel:
    """Kernel from explicit rows; each row must sum to exactly one.

    Targets not listed as states are outside the window and their mass is
    killed.
    """
    table = [(_hashable(s), [(_hashable(y), Fraction(p)) for y, p in row]) for s, row in table]
    states = [s for s, _ in table]
    known = set(states)
    rows = {}
    for s, row in table:
        total = sum((p for _, p in row), Fraction(0))
        if total != 1:
            raise NonStochasticRow(s, total)
        merged: dict[State, Fraction] = {}
        for y, p in row:
            if y in known:
                merged[y] = merged.get(y, Fraction(0)) + p
        rows[s] = list(merged.items())
    spec = {"kind": "explicit", "rows": [[s, [[y, str(p)] for y, p in row]] for s, row in table]}
    return Kernel(states, rows, name="explicit", boundary=Boundary.KILL, metric=metric,
                  origin=states[0] if states else None, spec=spec)


def _lifted_metric(metric, a, b) -> int:
    return metric(a[0], b[0])


class LiftedKernel(Kernel):
    """Space-time kernel on ``(state, generation)`` for generations 0..horizon.

    ``(x, m) -> (y, m + 1)`` with the base probability; the top layer leaves
    the window, so it is entirely killed.
    """

    def __init__(self, base: Kernel, horizon: int):
        self.base = base
        self.horizon = horizon
        states = [(x, m) for m in range(horizon + 1) for x in base.states]
        rows = {}
        for m in range(horizon + 1):
            for x in base.states:
                rows[(x, m)] = [((y, m + 1), p) for y, p in base.transitions(x)] if m < horizon else []
        metric = None
        if base.has_metric:
            metric = partial(_lifted_metric, base.metric)
        spec = {"kind": "lift", "base": base.spec, "horizon": horizon}
        super().__init__(states, rows, name=f"lift({base.name},H={horizon})", boundary=base.boundary,
                         metric=metric, origin=(base.origin, 0), spec=spec)

    def space_label(self, state):
        return state[0]


def space_time_lift(kernel: Kernel, horizon: int) -> LiftedKernel:
    """Lift ``kernel`` to space-time with generation window [0, horizon]."""
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    return LiftedKernel(kernel, horizon)


# ----------------------------------------------------------------------------
# space-time sets

RATE_FUNCTIONS: dict[str, Callable[[int], float]] = {
    "n": float,
    "sqrt": math.sqrt,
    "log": lambda n: math.log(n) if n > 1 else 0.0,
}


@dataclass(frozen=True)
class SpaceTimeSet:
    """Membership predicate over ``(state, generation)`` pairs.

    ``time_invariant`` sets ignore the generation. ``window`` declares the
    generation range the predicate is meant for; it is informational except
    for :meth:`mask`, which refuses generations outside it.
    """

    name: str
    predicate: Callable[[State, int], bool] = field(repr=False)
    time_invariant: bool = True
    window: tuple[int, int | None] = (0, None)
    spec: dict = field(default_factory=dict, compare=False, repr=False)
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def contains(self, state: State, generation: int = 0) -> bool:
        return bool(self.predicate(state, generation))

    def __contains__(self, state) -> bool:
        if not self.time_invariant:
            raise TypeError(f"set {self.name!r} is time dependent; use contains(state, generation)")
        return self.contains(state, 0)

    def mask(self, kernel: Kernel, generation: int = 0) -> np.ndarray:
        """Boolean membership over ``kernel.states`` at ``generation`` (read-only)."""
        gen = 0 if self.time_invariant else generation
        key = (kernel.uid, gen)
        hit = self._cache.get(key)
        if hit is None:
            hit = np.fromiter((self.contains(s, gen) for s in kernel.states), dtype=bool,
                              count=len(kernel))
            hit.flags.writeable = False
            self._cache[key] = hit
        return hit

    def state_mask(self, kernel: Kernel) -> np.ndarray:
        """Mask for engines, which need a set fixed in time."""
        if not self.time_invariant:
            raise ValueError(f"set {self.name!r} depends on the generation; "
                             "lift the kernel with space_time_lift and use .on_lift()")
        return self.mask(kernel)

    def on_lift(self) -> "SpaceTimeSet":
        """The same set viewed as a time-invariant set of lifted states."""
        return SpaceTimeSet(f"{self.name}@lift", lambda s, _g, _p=self.predicate: _p(s[0], s[1]),
                            True, self.window, {"kind": "lift", "of": self.spec})

    def from_generation(self, k: int) -> "SpaceTimeSet":
        """``A_k``: the part of the set at generations k and later."""
        return SpaceTimeSet(f"{self.name}[>={k}]",
                            lambda s, g, _p=self.predicate: g >= k and _p(s, g),
                            False, (max(k, self.window[0]), self.window[1]),
                            {"kind": "from_generation", "k": k, "of": self.spec})

    @classmethod
    def empty(cls) -> "SpaceTimeSet":
        return cls("empty", lambda s, g: False, True, spec={"kind": "empty"})

    @classmethod
    def of_states(cls, states: Iterable[State], name: str = "custom") -> "SpaceTimeSet":
        members = frozenset(_hashable(s) for s in states)
        return cls(name, lambda s, g: s in members, True,
                   spec={"kind": "custom", "states": sorted(members, key=repr)})

    @classmethod
    def of_pairs(cls, pairs: Iterable[tuple[State, int]], name: str = "custom") -> "SpaceTimeSet":
        members = frozenset((_hashable(s), int(g)) for s, g in pairs)
        gens = [g for _, g in members]
        window = (min(gens), max(gens)) if gens else (0, 0)
        return cls(name, lambda s, g: (s, g) in members, False, window,
                   spec={"kind": "custom", "members": sorted(members, key=repr)})

    @classmethod
    def origin(cls, kernel: Kernel) -> "SpaceTimeSet":
        o = kernel.origin
        return cls("origin", lambda s, g: s == o, True, spec={"kind": "origin"})

    @classmethod
    def halfspace(cls, c: int) -> "SpaceTimeSet":
        """States whose first lattice coordinate is at least ``c``."""
        return cls(f"halfspace({c})", lambda s, g: _coords(s)[0] >= c, True,
                   spec={"kind": "halfspace", "c": c})

    @classmethod
    def displacement(cls, kernel: Kernel, level: float, f: str | Callable[[int], float] = "n",
                     x0: State | None = None) -> "SpaceTimeSet":
        """``{(y, n) : n >= 1, d(y, x0) >= level * f(n)}``."""
        if not kernel.has_metric:
            raise MetricUnavailable(f"kernel {kernel.name!r} has no graph metric")
        rate = RATE_FUNCTIONS[f] if isinstance(f, str) else f
        x0 = kernel.origin if x0 is None else x0
        metric = kernel.metric
        return cls(f"displacement({level},{f if isinstance(f, str) else 'f'})",
                   lambda s, g: g >= 1 and metric(s, x0) >= level * rate(g), False,
                   spec={"kind": "displacement", "level": level,
                         "f": f if isinstance(f, str) else repr(f)})


# ----------------------------------------------------------------------------
# config specs


def kernel_from_spec(spec: Mapping) -> Kernel:
    """Build a kernel from ``{"kind": "lattice" | "tree" | "explicit", ...}``."""
    kind = spec.get("kind")
    boundary = spec.get("boundary", "kill")
    if kind == "lattice":
        return build_lattice(int(spec.get("d", 1)), int(spec["R"]), boundary)
    if kind == "tree":
        return build_tree(int(spec.get("b", 2)), int(spec["R"]), boundary)
    if kind == "explicit":
        return build_explicit(spec["rows"])
    raise ValueError(f"unknown kernel kind {kind!r}")


def set_from_spec(spec: Mapping | None, kernel: Kernel) -> SpaceTimeSet:
    """Build a named space-time set: origin, halfspace, displacement, custom, empty."""
    if spec is None:
        return SpaceTimeSet.empty()
    kind = spec.get("kind")
    if kind == "empty":
        return SpaceTimeSet.empty()
    if kind == "origin":
        return SpaceTimeSet.origin(kernel)
    if kind == "halfspace":
        return SpaceTimeSet.halfspace(int(spec["c"]))
    if kind == "displacement":
        return SpaceTimeSet.displacement(kernel, float(spec["level"]), spec.get("f", "n"))
    if kind == "custom":
        if "members" in spec:
            return SpaceTimeSet.of_pairs(spec["members"], spec.get("name", "custom"))
        return SpaceTimeSet.of_states(spec["states"], spec.get("name", "custom"))
    raise ValueError(f"unknown set kind {kind!r}")
