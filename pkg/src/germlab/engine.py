"""Deterministic recursions for local-time transforms and clamped iterates.

Two arithmetic modes are available:

``float``
    numpy float64 with a sparse transition matrix.
``exact``
    certified enclosures. Every field carries a lower and an upper bound;
    values stay exact rationals while their denominators are small and turn
    into outward-rounded binary floats otherwise (see
    :mod:`germlab.enclosure`), since exact denominators grow exponentially
    with the horizon. All maps involved are monotone in the field, so running
    the recursion once with downward and once with upward rounding brackets
    the true values.

Mass that leaves a killing window goes to a cemetery state outside every
set, whose field value is identically 1; ``PF(x)`` therefore includes the
killed mass of row x.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from germlab import enclosure as enc
from germlab.offspring import OffspringDist
from germlab.orders import AlphaInvalid, GermThreshold, NotGermLess, Relation, certify_alpha, compare_germ, germ_threshold
from germlab.statespace import Kernel, LiftedKernel, SpaceTimeSet

__all__ = [
    "ChainViolation",
    "GermBoundReport",
    "IterationReport",
    "Mode",
    "ValueField",
    "clamped_pair_iteration",
    "germ_bound_check",
    "hitting_probability",
    "laplace_local_time",
    "pioneer_h_recursion",
]

FLOAT_SLACK = 1e-12
RESIDUAL_TOL = 1e-10
LIMIT_TOL = 1e-9


class Mode(str, enum.Enum):
    FLOAT = "float"
    EXACT = "exact"


class ChainViolation(AssertionError):
    """An ordering the clamped recursion guarantees was refuted numerically."""


# ----------------------------------------------------------------------------
# arithmetic


def _pf_exact(kernel: Kernel, v: Sequence, up: bool) -> list:
    out = []
    for row, kill in zip(kernel.exact_rows, kernel.exact_kill):
        s = kill
        for j, p in row:
            s = enc.add(s, enc.mul(p, v[j], up), up)
        out.append(s)
    return out


def _pgf_exact(dist: OffspringDist, v: Sequence, up: bool) -> list:
    coeffs = dist.pgf.coeffs
    return [enc.horner(coeffs, x, up) for x in v]


def _pf_float(kernel: Kernel, v: np.ndarray) -> np.ndarray:
    return kernel.matrix @ v + kernel.kill_vector


def _pgf_float(dist: OffspringDist, x: np.ndarray) -> np.ndarray:
    c = dist.pgf_coeffs
    out = np.full_like(x, c[-1])
    for a in c[-2::-1]:
        out = out * x + a
    return out


def _set_mask(kernel: Kernel, A: SpaceTimeSet) -> np.ndarray:
    if isinstance(kernel, LiftedKernel):
        return A.on_lift().mask(kernel)
    return A.state_mask(kernel)


def _check_mode(mode) -> Mode:
    try:
        return Mode(mode)
    except ValueError:
        raise ValueError(f"mode must be 'float' or 'exact', got {mode!r}") from None


# ----------------------------------------------------------------------------
# value fields


@dataclass(frozen=True, eq=False)
class ValueField:
    """Values on the kernel window at one generation.

    In float mode ``lower is upper``. In exact mode both are tuples of
    enclosure numbers bracketing the true value; ``tight`` states have equal
    :class:`Fraction` bounds and hold the exact value.
    """

    kernel: Kernel
    generation: int
    lower: Sequence
    upper: Sequence
    bounds: tuple
    mode: Mode = Mode.FLOAT

    def __post_init__(self):
        lo_b, hi_b = self.bounds
        if self.mode is Mode.FLOAT:
            v = np.asarray(self.lower)
            if v.shape != (len(self.kernel),):
                raise ValueError("field does not cover the window")
            if np.any(v < float(lo_b) - FLOAT_SLACK) or np.any(v > float(hi_b) + FLOAT_SLACK):
                raise ValueError(f"field values leave [{lo_b}, {hi_b}]")
        else:
            if len(self.lower) != len(self.kernel) or len(self.upper) != len(self.kernel):
                raise ValueError("field does not cover the window")
            for a, b in zip(self.lower, self.upper):
                if enc.cmp(lo_b, a) > 0 or enc.cmp(a, b) > 0 or enc.cmp(b, hi_b) > 0:
                    raise ValueError(f"enclosure [{a}, {b}] not inside [{lo_b}, {hi_b}]")

    @property
    def exact(self) -> bool:
        return self.mode is Mode.EXACT

    @property
    def values(self) -> np.ndarray:
        """Float values (enclosure midpoints in exact mode)."""
        if not self.exact:
            return np.asarray(self.lower)
        return np.array([(enc.as_float(a) + enc.as_float(b)) / 2 for a, b in zip(self.lower, self.upper)])

    @property
    def lower_float(self) -> np.ndarray:
        return np.asarray(self.lower, dtype=float) if not self.exact else \
            np.array([enc.as_float(a) for a in self.lower])

    @property
    def upper_float(self) -> np.ndarray:
        return np.asarray(self.upper, dtype=float) if not self.exact else \
            np.array([enc.as_float(b) for b in self.upper])

    def enclosure(self, state) -> tuple:
        i = self.kernel.index[state]
        return self.lower[i], self.upper[i]

    def tight(self, state) -> bool:
        lo, hi = self.enclosure(state)
        return enc.is_exact(lo) and lo == hi

    def __getitem__(self, state):
        """The value; exact mode gives a Fraction when tight and the float
        midpoint of the enclosure otherwise."""
        lo, hi = self.enclosure(state)
        if not self.exact:
            return float(lo)
        if enc.is_exact(lo) and lo == hi:
            return lo
        return (enc.as_float(lo) + enc.as_float(hi)) / 2

    def radius(self) -> float:
        if not self.exact:
            return 0.0
        return max((enc.as_float(enc.sub(b, a, True)) / 2 for a, b in zip(self.lower, self.upper)),
                   default=0.0)


def _field(kernel, gen, lo, hi, bounds, mode) -> ValueField:
    if mode is Mode.FLOAT:
        lo.flags.writeable = False
        return ValueField(kernel, gen, lo, lo, bounds, mode)
    return ValueField(kernel, gen, tuple(lo), tuple(hi), bounds, mode)


def _leq(a: ValueField, b: ValueField) -> bool:
    """False only when ``a <= b`` is refuted somewhere (float slack or enclosures)."""
    if a.mode is Mode.FLOAT:
        return bool(np.all(np.asarray(a.lower) <= np.asarray(b.lower) + FLOAT_SLACK))
    return all(enc.cmp(x, y) <= 0 for x, y in zip(a.lower, b.upper))


def _sup_delta(a: ValueField, b: ValueField) -> float:
    return float(np.max(np.abs(a.values - b.values), initial=0.0))


# ----------------------------------------------------------------------------
# one-step maps, applied to (lower, upper) pairs in exact mode


class _Stepper:
    """Applies ``x -> clamp(weight(x) * P_dist(PF(x)))`` in either mode.

    ``weight`` is per state; ``floor`` is the lower clamp (``None`` for no
    clamp) and ``cap_by_self`` takes the minimum with the previous value.
    ``pinned`` states are forced to ``pin_value``.
    """

    def __init__(self, kernel, dist, weight, mode, floor=None, cap_by_self=False,
                 pinned=None, pin_value=None):
        self.kernel = kernel
        self.dist = dist
        self.mode = mode
        self.floor = floor
        self.cap_by_self = cap_by_self
        self.pinned = pinned
        self.pin_value = pin_value
        if mode is Mode.FLOAT:
            self.weight = np.asarray([float(w) for w in weight])
            self.floor_f = None if floor is None else float(floor)
            self.pin_f = None if pin_value is None else float(pin_value)
        else:
            self.weight = [Fraction(w) for w in weight]

    def pre_clamp(self, lo, hi):
        """``weight * P_dist(PF)`` before clamping, as a (lower, upper) pair."""
        if self.mode is Mode.FLOAT:
            v = self.weight * _pgf_float(self.dist, _pf_float(self.kernel, lo))
            return v, v
        out = []
        for vals, up in ((lo, False), (hi, True)):
            y = _pgf_exact(self.dist, _pf_exact(self.kernel, vals, up), up)
            out.append([enc.mul(w, a, up) for w, a in zip(self.weight, y)])
        return out[0], out[1]

    def finish(self, pre, prev):
        if self.mode is Mode.FLOAT:
            v = pre[0]
            if self.floor is not None:
                v = np.maximum(v, self.floor_f)
            if self.cap_by_self:
                v = np.minimum(v, prev[0])
            if self.pinned is not None:
                v = np.where(self.pinned, self.pin_f, v)
            return v, v
        res = []
        for k in (0, 1):
            v = list(pre[k])
            if self.floor is not None:
                v = [enc.maximum(self.floor, a) for a in v]
            if self.cap_by_self:
                v = [enc.minimum(a, b) for a, b in zip(v, prev[k])]
            if self.pinned is not None:
                v = [self.pin_value if p else a for p, a in zip(self.pinned, v)]
            res.append(v)
        return res[0], res[1]

    def __call__(self, lo, hi):
        return self.finish(self.pre_clamp(lo, hi), (lo, hi))


def _initial(kernel, mask, on_set, off_set, mode):
    if mode is Mode.FLOAT:
        v = np.where(mask, float(on_set), float(off_set))
        return v, v
    v = [Fraction(on_set) if m else Fraction(off_set) for m in mask]
    return v, list(v)


# ----------------------------------------------------------------------------
# engines


def laplace_local_time(kernel: Kernel, dist: OffspringDist, A: SpaceTimeSet, t, n: int,
                       mode: Mode | str = Mode.FLOAT) -> list[ValueField]:
    """Fields ``x -> E_x[t**L_m(A)]`` for generations m = 0..n.

    ``L_m(A)`` counts particle visits to A in generations 0..m; the
    recursion conditions on the first generation.
    """
    mode = _check_mode(mode)
    if n < 0:
        raise ValueError(f"horizon must be nonnegative, got {n}")
    t = Fraction(t) if mode is Mode.EXACT else t
    if not 0 < t <= 1:
        raise ValueError(f"t must lie in (0, 1], got {t}")
    mask = _set_mask(kernel, A)
    weight = [t if m else 1 for m in mask]
    step = _Stepper(kernel, dist, weight, mode)
    lo, hi = _initial(kernel, mask, t, 1, mode)
    bounds = (0, 1)
    fields = [_field(kernel, 0, lo, hi, bounds, mode)]
    for m in range(1, n + 1):
        lo, hi = step(lo, hi)
        fields.append(_field(kernel, m, lo, hi, bounds, mode))
    return fields


@dataclass
class IterationReport:
    """Iterates of a monotone recursion with convergence diagnostics.

    ``deltas[k]`` is the sup-norm change from iterate k to k+1.
    ``deltas_nonincreasing`` is reported rather than enforced; it is not
    guaranteed for every window.
    """

    fields: list[ValueField]
    deltas: np.ndarray
    residual: float
    tolerance: float = RESIDUAL_TOL

    @property
    def final(self) -> ValueField:
        return self.fields[-1]

    @property
    def converged(self) -> bool:
        return self.residual <= self.tolerance

    @property
    def deltas_nonincreasing(self) -> bool:
        d = self.deltas
        return bool(np.all(d[1:] <= d[:-1] + FLOAT_SLACK))


def _resolve_alpha(mu, nu, alpha) -> GermThreshold:
    if compare_germ(mu, nu).relation is not Relation.LESS:
        raise NotGermLess(f"{mu} is not germ-less than {nu}")
    if alpha is None:
        return germ_threshold(mu, nu)
    alpha = Fraction(alpha)
    if not 0 <= alpha < 1 or not certify_alpha(mu, nu, alpha):
        raise AlphaInvalid(f"alpha={alpha} does not certify P_mu >= P_nu on [alpha, 1]")
    return GermThreshold(alpha, tight=False)


def _clamped_stepper(kernel, dist, mask, alpha, mode):
    weight = [alpha if m else 1 for m in mask]
    return _Stepper(kernel, dist, weight, mode, floor=alpha, cap_by_self=True)


def clamped_pair_iteration(kernel: Kernel, mu: OffspringDist, nu: OffspringDist, A: SpaceTimeSet,
                           n: int, *, alpha=None, mode: Mode | str = Mode.FLOAT, stride: int = 1,
                           tolerance: float = RESIDUAL_TOL):
    """Iterate ``F <- I_mu F`` and ``G <- I_nu G`` from ``alpha**1(x in A)``.

    ``I F(x) = [alpha v (alpha**1(x in A) P(PF(x)))] ^ F(x)``. At every step
    the chain ``alpha <= I_nu F <= I_mu F <= F <= 1``, ``G <= F`` and the
    monotone decrease of both sequences are checked; a refuted inequality
    raises :class:`ChainViolation`.

    Returns ``(F_report, G_report, threshold)``; iterates are kept every
    ``stride`` steps plus the last one.
    """
    mode = _check_mode(mode)
    if n < 0:
        raise ValueError(f"horizon must be nonnegative, got {n}")
    thr = _resolve_alpha(mu, nu, alpha)
    a = thr.alpha if mode is Mode.EXACT else float(thr.alpha)
    mask = _set_mask(kernel, A)
    step_mu = _clamped_stepper(kernel, mu, mask, a, mode)
    step_nu = _clamped_stepper(kernel, nu, mask, a, mode)
    bounds = (thr.alpha, 1) if mode is Mode.EXACT else (float(thr.alpha), 1.0)
    floor = _field(kernel, 0, *_initial(kernel, mask, a, a, mode), bounds, mode)
    ones = _field(kernel, 0, *_initial(kernel, mask, 1, 1, mode), bounds, mode)

    F = G = _initial(kernel, mask, a, 1, mode)
    F_field = G_field = _field(kernel, 0, *F, bounds, mode)
    F_kept, G_kept = [F_field], [G_field]
    F_deltas, G_deltas = [], []
    for m in range(1, n + 1):
        F_next = step_mu(*F)
        G_next = step_nu(*G)
        nu_of_F = _field(kernel, m, *step_nu(*F), bounds, mode)
        F_new = _field(kernel, m, *F_next, bounds, mode)
        G_new = _field(kernel, m, *G_next, bounds, mode)
        checks = (
            ("alpha <= I_nu F", floor, nu_of_F),
            ("I_nu F <= I_mu F", nu_of_F, F_new),
            ("I_mu F <= F", F_new, F_field),
            ("F <= 1", F_field, ones),
            ("G <= F", G_new, F_new),
            ("G decreasing", G_new, G_field),
        )
        for label, lhs, rhs in checks:
            if not _leq(lhs, rhs):
                raise ChainViolation(f"{label} refuted at generation {m}")
        F_deltas.append(_sup_delta(F_new, F_field))
        G_deltas.append(_sup_delta(G_new, G_field))
        F, G, F_field, G_field = F_next, G_next, F_new, G_new
        if m % stride == 0 or m == n:
            F_kept.append(F_field)
            G_kept.append(G_field)
    F_res = _sup_delta(_field(kernel, n + 1, *step_mu(*F), bounds, mode), F_field)
    G_res = _sup_delta(_field(kernel, n + 1, *step_nu(*G), bounds, mode), G_field)
    return (IterationReport(F_kept, np.array(F_deltas), F_res, tolerance),
            IterationReport(G_kept, np.array(G_deltas), G_res, tolerance), thr)


def _pioneer(kernel, mu, D_mask, alpha, n, mode) -> list[ValueField]:
    weight = [1] * len(kernel)
    step = _Stepper(kernel, mu, weight, mode, cap_by_self=True, pinned=D_mask, pin_value=alpha)
    lo, hi = _initial(kernel, D_mask, alpha, 1, mode)
    bounds = (0, 1)  # several pioneers push the value below alpha
    fields = [_field(kernel, 0, lo, hi, bounds, mode)]
    for m in range(1, n + 1):
        lo, hi = step(lo, hi)
        fields.append(_field(kernel, m, lo, hi, bounds, mode))
    return fields


def pioneer_h_recursion(kernel: Kernel, mu: OffspringDist, D: SpaceTimeSet, alpha, n: int,
                        mode: Mode | str = Mode.FLOAT) -> list[ValueField]:
    """``H_0 = alpha**1(x in D)``; ``H_{m+1} = alpha`` on D and
    ``P_mu(PH_m) ^ H_m`` off D. ``H_m(x) = E_x[alpha**E_m(D)]`` with
    ``E_m(D)`` the number of pioneers of D by generation m."""
    mode = _check_mode(mode)
    if n < 0:
        raise ValueError(f"horizon must be nonnegative, got {n}")
    alpha = Fraction(alpha)
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return _pioneer(kernel, mu, _set_mask(kernel, D), alpha if mode is Mode.EXACT else float(alpha), n, mode)


def hitting_probability(kernel: Kernel, D: SpaceTimeSet, n: int | None = None) -> np.ndarray:
    """Probability that a single walker started at x visits D.

    With ``n`` the visit must happen within n steps (finite-horizon
    recursion); without it the linear system on the complement of D is
    solved directly.
    """
    mask = _set_mask(kernel, D)
    P = kernel.matrix
    if n is not None:
        h = mask.astype(float)
        for _ in range(n):
            h = np.where(mask, 1.0, P @ h)
        return h
    free = np.flatnonzero(~mask)
    h = mask.astype(float)
    if free.size == 0:
        return h
    Q = P[free][:, free]
    b = np.asarray(P[free][:, np.flatnonzero(mask)].sum(axis=1)).ravel()
    h[free] = spla.spsolve(sp.identity(free.size, format="csc") - Q.tocsc(), b)
    return h


# ----------------------------------------------------------------------------
# germ bound check


@dataclass
class GermBoundReport:
    """Per-generation, per-state margins of the two computable halves.

    ``margins_i[m][x]`` bounds ``G_m(x) - (alpha v E_x^nu[alpha**L_m(A)])``
    from below; ``margins_ii[m][x]`` is ``H_m(x) - F_lim(x)`` where ``F_lim``
    is the converged clamped iterate and ``H`` the pioneer recursion for
    ``D = {F_lim <= alpha + d_tol}``.
    """

    alpha: GermThreshold
    margins_i: np.ndarray
    margins_ii: np.ndarray
    D: np.ndarray
    limit_residual: float
    limit_steps: int
    mode: Mode
    tol_ii: float = LIMIT_TOL
    exact_margins_i: list = field(default_factory=list, repr=False)

    @property
    def min_margin_i(self) -> float:
        return float(self.margins_i.min())

    @property
    def min_margin_ii(self) -> float:
        return float(self.margins_ii.min())

    @property
    def holds_i(self) -> bool:
        if self.mode is Mode.EXACT:
            return all(enc.cmp(m, enc.ZERO) >= 0 for row in self.exact_margins_i for m in row)
        return self.min_margin_i >= -FLOAT_SLACK

    @property
    def holds_ii(self) -> bool:
        return self.min_margin_ii >= -self.tol_ii

    @property
    def limit_converged(self) -> bool:
        return self.limit_residual <= RESIDUAL_TOL


def _clamped_limit(kernel, mu, mask, alpha: float, max_steps: int) -> tuple[np.ndarray, float, int]:
    step = _clamped_stepper(kernel, mu, mask, alpha, Mode.FLOAT)
    F = _initial(kernel, mask, alpha, 1, Mode.FLOAT)[0]
    for k in range(1, max_steps + 1):
        new = step(F, F)[0]
        delta = float(np.max(np.abs(new - F), initial=0.0))
        F = new
        if delta <= RESIDUAL_TOL / 10:
            break
    residual = float(np.max(np.abs(step(F, F)[0] - F), initial=0.0))
    return F, residual, k


class _Nodes:
    """Hash-consed enclosures: equal node ids denote the same real number.

    Exact values are their own ids. Any other value gets the id of the
    operation that produced it together with the ids of its inputs, so two
    results of the same operation on the same inputs share an id even when
    their enclosures are not tight.
    """

    def __init__(self):
        self.memo: dict = {}
        self.counter = itertools.count()

    def make(self, key, lo, hi):
        q = enc.tighten(lo, hi)
        if q is not None:
            return (("q", q), q, q)
        hit = self.memo.get(key)
        if hit is None:
            hit = self.memo[key] = (next(self.counter), lo, hi)
        return hit

    def exact(self, q):
        return (("q", q), q, q)

    def apply(self, kernel, dist, weight, x, inputs):
        key = ("V", id(dist), x, tuple(inputs[j][0] for j, _ in kernel.exact_rows[x]))
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        bounds = []
        for k, up in ((1, False), (2, True)):
            s = kernel.exact_kill[x]
            for j, p in kernel.exact_rows[x]:
                s = enc.add(s, enc.mul(p, inputs[j][k], up), up)
            bounds.append(enc.mul(weight, enc.horner(dist.pgf.coeffs, s, up), up))
        return self.make(key, *bounds)

    def maximum(self, a, b):
        if a[0] == b[0] or enc.cmp(a[1], b[2]) >= 0:
            return a
        if enc.cmp(b[1], a[2]) >= 0:
            return b
        return self.make(("max", frozenset((a[0], b[0]))), enc.maximum(a[1], b[1]), enc.maximum(a[2], b[2]))

    def minimum(self, a, b):
        if a[0] == b[0] or enc.cmp(a[2], b[1]) <= 0:
            return a
        if enc.cmp(b[2], a[1]) <= 0:
            return b
        return self.make(("min", frozenset((a[0], b[0]))), enc.minimum(a[1], b[1]), enc.minimum(a[2], b[2]))

    def margin(self, a, b):
        """Lower bound of ``a - b``; exactly zero for identical nodes."""
        if a[0] == b[0]:
            return enc.ZERO
        return enc.sub(a[1], b[2], False)


def _exact_margins_i(kernel, nu, mask, a: Fraction, n: int) -> list[list]:
    nodes = _Nodes()
    floor = nodes.exact(a)
    G = [nodes.exact(a if m else enc.ONE) for m in mask]
    L = list(G)
    rows = [[nodes.margin(g, nodes.maximum(floor, l)) for g, l in zip(G, L)]]
    weight = [a if m else enc.ONE for m in mask]
    for _ in range(n):
        G = [nodes.minimum(G[x], nodes.maximum(floor, nodes.apply(kernel, nu, weight[x], x, G)))
             for x in range(len(kernel))]
        L = [nodes.apply(kernel, nu, weight[x], x, L) for x in range(len(kernel))]
        rows.append([nodes.margin(g, nodes.maximum(floor, l)) for g, l in zip(G, L)])
    return rows


def germ_bound_check(kernel: Kernel, mu: OffspringDist, nu: OffspringDist, A: SpaceTimeSet, n: int, *,
                     alpha=None, mode: Mode | str = Mode.FLOAT, d_tol: float = LIMIT_TOL,
                     limit_steps: int = 20000) -> GermBoundReport:
    """Check ``G_m >= alpha v E^nu[alpha**L_m(A)]`` and ``F_lim <= H_m`` for m <= n.

    In exact mode the margins of the first half are certified lower bounds,
    and values that are provably the same number (see :class:`_Nodes`) give
    margins of exactly zero.
    """
    mode = _check_mode(mode)
    if n < 0:
        raise ValueError(f"horizon must be nonnegative, got {n}")
    thr = _resolve_alpha(mu, nu, alpha)
    mask = _set_mask(kernel, A)
    exact_rows: list[list] = []
    if mode is Mode.EXACT:
        a = thr.alpha
        exact_rows = _exact_margins_i(kernel, nu, mask, a, n)
        margins_i = np.array([[enc.as_float(x) for x in row] for row in exact_rows])
    else:
        a = float(thr.alpha)
        clamp = _clamped_stepper(kernel, nu, mask, a, mode)
        lap = _Stepper(kernel, nu, [a if m else 1 for m in mask], mode)
        G = _initial(kernel, mask, a, 1, mode)
        L = _initial(kernel, mask, a, 1, mode)
        float_rows = [G[0] - np.maximum(a, L[0])]
        for _ in range(n):
            G = clamp(*G)
            L = lap(*L)
            float_rows.append(G[0] - np.maximum(a, L[0]))
        margins_i = np.array(float_rows)

    F_lim, residual, steps = _clamped_limit(kernel, mu, mask, float(thr.alpha), limit_steps)
    D_mask = F_lim <= float(thr.alpha) + d_tol
    H = _pioneer(kernel, mu, D_mask, a, n, mode)
    margins_ii = np.array([h.upper_float - F_lim for h in H])
    return GermBoundReport(thr, margins_i, margins_ii, D_mask, residual, steps, mode,
                           exact_margins_i=exact_rows)
