"""Seeded Monte Carlo simulation of branching Markov processes.

Two simulators share the same dynamics (offspring first, then one kernel
step per child, killed children vanish):

* the particle simulator keeps every particle with its parent and stream
  key (see :mod:`germlab.rng`), so a replica is a pure function of
  ``(seed, replica)`` and can be replayed bit for bit on a lifted kernel;
* the occupancy simulator only keeps per-state counts and samples whole
  cohorts with binomial splits. It is exact in law for every statistic
  below and handles populations of 2**60 particles.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from germlab import rng as srng
from germlab.offspring import OffspringDist
from germlab.statespace import Kernel, LiftedKernel, MetricUnavailable, SpaceTimeSet

__all__ = [
    "BatchResult",
    "CountResult",
    "Population",
    "Trajectory",
    "local_time",
    "max_displacement",
    "pioneer_count",
    "simulate",
    "simulate_batch",
    "simulate_counts",
]

COUNT_GENERATOR = "numpy-philox4x64 (SeedSequence(seed, block))"
COUNT_LIMIT = 2**62


class SimulationError(ValueError):
    pass


def _generation_mask(kernel: Kernel, A: SpaceTimeSet, n: int) -> np.ndarray:
    if isinstance(kernel, LiftedKernel):
        return A.on_lift().mask(kernel)
    return A.mask(kernel, n)


def _start_index(kernel: Kernel, start) -> int:
    try:
        return kernel.index[start]
    except KeyError:
        raise SimulationError(f"start state {start!r} is outside the window") from None


# ----------------------------------------------------------------------------
# particle simulator


@dataclass(frozen=True, eq=False)
class Population:
    """One generation: particle states (window indices), parent positions in
    the previous generation, replica ids and stream keys.

    ``flags[name]`` marks particles with a strict ancestor in the tracked set.
    """

    generation: int
    states: np.ndarray
    parents: np.ndarray
    replicas: np.ndarray
    keys: np.ndarray
    flags: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.states)

    def occupancy(self, kernel: Kernel) -> dict:
        """``B_n``: particle count per occupied state label."""
        idx, counts = np.unique(self.states, return_counts=True)
        return {kernel.states[i]: int(c) for i, c in zip(idx, counts)}


@dataclass(eq=False)
class Trajectory:
    """Populations 0..last nonempty generation (or up to truncation).

    ``extinct_at`` is the first empty generation; ``cap_hit`` marks a run
    stopped because the next generation would exceed the cap, in which case
    ``truncated_at`` is that generation.
    """

    kernel: Kernel
    populations: list[Population]
    seed: int
    replica: int
    horizon: int
    cap: int
    extinct_at: int | None = None
    cap_hit: bool = False
    truncated_at: int | None = None
    generator: str = srng.GENERATOR_NAME

    @property
    def sizes(self) -> list[int]:
        return [len(p) for p in self.populations]

    def labels(self, n: int) -> list:
        return [self.kernel.states[i] for i in self.populations[n].states]


class _Table:
    """Float inverse-CDF tables for one offspring law and one kernel."""

    def __init__(self, kernel: Kernel, dist: OffspringDist):
        self.outcomes = np.array(dist.outcomes, dtype=np.int64)
        self.offspring_cum = dist.cumulative_float
        self.targets, self.step_cum = kernel.sampling_table

    def offspring(self, keys: np.ndarray) -> np.ndarray:
        u = srng.uniforms(keys, srng.OFFSPRING)
        pos = np.searchsorted(self.offspring_cum, u, side="right")
        return self.outcomes[np.minimum(pos, len(self.outcomes) - 1)]

    def step(self, states: np.ndarray, keys: np.ndarray) -> np.ndarray:
        u = srng.uniforms(keys, srng.STEP)
        col = (u[:, None] >= self.step_cum[states]).sum(axis=1)
        return self.targets[states, col]


def _particle_run(kernel, dist, start_idx, horizon, cap, seed, replicas, track=None):
    """Yield ``(population, capped_replicas)`` for generations 0..horizon.

    ``capped_replicas`` lists replicas whose next generation would exceed
    ``cap``; their particles are dropped from the following generation.
    """
    table = _Table(kernel, dist)
    track = track or {}
    reps = np.asarray(replicas, dtype=np.int64)
    states = np.full(len(reps), start_idx, dtype=np.int64)
    keys = srng.root_keys(seed, reps)
    parents = np.full(len(reps), -1, dtype=np.int64)
    flags = {name: np.zeros(len(reps), dtype=bool) for name in track}
    n_rep = int(reps.max()) + 1 if len(reps) else 0
    for n in range(horizon + 1):
        pop = Population(n, states, parents, reps, keys, flags)
        if n == horizon or len(states) == 0:
            yield pop, np.empty(0, dtype=np.int64)
            return
        counts = table.offspring(keys)
        totals = np.bincount(reps, weights=counts, minlength=n_rep)
        over = np.flatnonzero(totals > cap)
        yield pop, over
        if len(over):
            counts = np.where(np.isin(reps, over), 0, counts)
        parent = np.repeat(np.arange(len(states)), counts)
        first = np.concatenate(([0], np.cumsum(counts)[:-1]))
        child_index = np.arange(len(parent)) - np.repeat(first, counts)
        child_keys = srng.child_keys(keys[parent], child_index)
        new_states = table.step(states[parent], child_keys)
        alive = new_states >= 0
        new_flags = {}
        for name, A in track.items():
            hit = _generation_mask(kernel, A, n)[states] | flags[name]
            new_flags[name] = hit[parent][alive]
        states, keys, reps = new_states[alive], child_keys[alive], reps[parent][alive]
        parents, flags = parent[alive], new_flags


def simulate(kernel: Kernel, dist: OffspringDist, start, horizon: int, cap: int = 10**6, seed: int = 0,
             replica: int = 0, track: Mapping[str, SpaceTimeSet] | None = None) -> Trajectory:
    """Simulate one replica; a deterministic function of all arguments."""
    if cap < 1:
        raise SimulationError("cap must be at least 1")
    if horizon < 0:
        raise SimulationError("horizon must be nonnegative")
    start_idx = _start_index(kernel, start)
    traj = Trajectory(kernel, [], seed, replica, horizon, cap)
    for pop, over in _particle_run(kernel, dist, start_idx, horizon, cap, seed, [replica], track):
        if len(pop) == 0:
            traj.extinct_at = pop.generation
            break
        traj.populations.append(pop)
        if len(over):
            traj.cap_hit = True
            traj.truncated_at = pop.generation + 1
            break
    return traj


def _as_mask_fn(traj: Trajectory, A: SpaceTimeSet):
    return lambda n: _generation_mask(traj.kernel, A, n)


def local_time(traj: Trajectory, A: SpaceTimeSet, n: int | None = None) -> int:
    """Particle visits to A in generations 0..n (default: all recorded)."""
    mask = _as_mask_fn(traj, A)
    last = len(traj.populations) - 1 if n is None else min(n, len(traj.populations) - 1)
    return int(sum(mask(m)[traj.populations[m].states].sum() for m in range(last + 1)))


def pioneer_count(traj: Trajectory, D: SpaceTimeSet, n: int | None = None) -> int:
    """Particles in D by generation n none of whose strict ancestors were in D."""
    mask = _as_mask_fn(traj, D)
    last = len(traj.populations) - 1 if n is None else min(n, len(traj.populations) - 1)
    total = 0
    ancestor = np.zeros(0, dtype=bool)
    for m in range(last + 1):
        pop = traj.populations[m]
        inherited = ancestor[pop.parents] if m else np.zeros(len(pop), dtype=bool)
        here = mask(m)[pop.states]
        total += int((here & ~inherited).sum())
        ancestor = here | inherited
    return total


def max_displacement(traj: Trajectory, origin=None) -> list[int]:
    """``M_n = max d(start-or-origin, particle)`` for each recorded generation."""
    kernel = traj.kernel
    if not kernel.has_metric:
        raise MetricUnavailable(f"kernel {kernel.name!r} has no graph metric")
    if origin is None:
        origin = kernel.states[traj.populations[0].states[0]]
    dist = np.array([kernel.metric(s, origin) for s in kernel.states])
    return [int(dist[p.states].max()) for p in traj.populations]


@dataclass
class BatchResult:
    """Per-replica summaries of a particle batch.

    Arrays indexed ``[replica, generation]`` hold zeros (or -1 for
    displacement) after extinction or truncation.
    """

    seed: int
    replicas: np.ndarray
    horizon: int
    cap: int
    sizes: np.ndarray
    extinct_at: np.ndarray
    capped_at: np.ndarray
    hits: dict[str, np.ndarray]
    pioneers: dict[str, np.ndarray]
    displacement: np.ndarray | None
    generator: str = srng.GENERATOR_NAME

    @property
    def cap_hit(self) -> np.ndarray:
        return self.capped_at >= 0

    @property
    def alive_at_horizon(self) -> np.ndarray:
        return (self.sizes[:, -1] > 0) & ~self.cap_hit

    def local_time(self, name: str, n: int | None = None) -> np.ndarray:
        h = self.hits[name]
        return h.sum(axis=1) if n is None else h[:, : n + 1].sum(axis=1)

    def pioneer_count(self, name: str, n: int | None = None) -> np.ndarray:
        p = self.pioneers[name]
        return p.sum(axis=1) if n is None else p[:, : n + 1].sum(axis=1)


def simulate_batch(kernel: Kernel, dist: OffspringDist, start, horizon: int, replicas: int | Sequence[int],
                   seed: int = 0, cap: int = 10**5, sets: Mapping[str, SpaceTimeSet] | None = None,
                   pioneer_sets: Mapping[str, SpaceTimeSet] | None = None,
                   displacement: bool = False, chunk: int = 4096) -> BatchResult:
    """Run many particle replicas at once; each equals its single-run twin."""
    if cap < 1:
        raise SimulationError("cap must be at least 1")
    start_idx = _start_index(kernel, start)
    reps = np.arange(replicas) if isinstance(replicas, int) else np.asarray(replicas, dtype=np.int64)
    sets = dict(sets or {})
    pioneer_sets = dict(pioneer_sets or {})
    R, H = len(reps), horizon
    sizes = np.zeros((R, H + 1), dtype=np.int64)
    hits = {k: np.zeros((R, H + 1), dtype=np.int64) for k in sets}
    pions = {k: np.zeros((R, H + 1), dtype=np.int64) for k in pioneer_sets}
    disp = np.full((R, H + 1), -1, dtype=np.int64) if displacement else None
    extinct = np.full(R, -1, dtype=np.int64)
    capped = np.full(R, -1, dtype=np.int64)
    dist_from_start = None
    if displacement:
        if not kernel.has_metric:
            raise MetricUnavailable(f"kernel {kernel.name!r} has no graph metric")
        origin = kernel.states[start_idx]
        dist_from_start = np.array([kernel.metric(s, origin) for s in kernel.states], dtype=np.int64)

    for lo in range(0, R, chunk):
        block = reps[lo: lo + chunk]
        pos = np.full(int(block.max()) + 1, -1, dtype=np.int64)
        pos[block] = np.arange(lo, lo + len(block))
        for pop, over in _particle_run(kernel, dist, start_idx, H, cap, seed, block, pioneer_sets):
            n = pop.generation
            rows = pos[pop.replicas]
            sizes[:, n] += np.bincount(rows, minlength=R)
            for name, A in sets.items():
                m = _generation_mask(kernel, A, n)[pop.states]
                hits[name][:, n] += np.bincount(rows[m], minlength=R)
            for name, D in pioneer_sets.items():
                m = _generation_mask(kernel, D, n)[pop.states] & ~pop.flags[name]
                pions[name][:, n] += np.bincount(rows[m], minlength=R)
            if disp is not None and len(pop):
                np.maximum.at(disp[:, n], rows, dist_from_start[pop.states])
            if len(over):
                capped[pos[over]] = n + 1
    for i in range(R):
        if capped[i] >= 0:
            continue
        empty = np.flatnonzero(sizes[i] == 0)
        if len(empty):
            extinct[i] = empty[0]
    return BatchResult(seed, reps, H, cap, sizes, extinct, capped, hits, pions, disp)


# ----------------------------------------------------------------------------
# occupancy simulator


def _conditional(probs: Sequence[Fraction]) -> np.ndarray:
    """Sequential-binomial split probabilities ``p_j / (1 - p_0 - ... - p_{j-1})``."""
    out, rest = [], Fraction(1)
    for p in probs:
        out.append(float(p / rest) if rest > 0 else 0.0)
        rest -= p
    return np.minimum(np.array(out, dtype=float), 1.0)


@dataclass
class _CountSpec:
    """Plain arrays describing a run, cheap to send to worker processes."""

    step_targets: np.ndarray
    step_cond: np.ndarray
    outcomes: np.ndarray
    offspring_cond: np.ndarray
    start: int
    horizon: int
    set_masks: dict
    pioneer_mask: np.ndarray | None
    distance: np.ndarray | None
    keep_visits: bool
    snapshot: np.ndarray | None
    limit: int


def _count_spec(kernel, dist, start_idx, horizon, sets, pioneer, displacement, keep_visits, snapshot, limit):
    width = max((len(r) for r in kernel.exact_rows), default=0)
    S = len(kernel)
    tgt = np.full((S, width), -1, dtype=np.int64)
    cond = np.zeros((S, width))
    for i, row in enumerate(kernel.exact_rows):
        tgt[i, : len(row)] = [j for j, _ in row]
        cond[i, : len(row)] = _conditional([p for _, p in row])
    masks = {name: np.stack([_generation_mask(kernel, A, n) for n in range(horizon + 1)])
             for name, A in sets.items()}
    pmask = None
    if pioneer is not None:
        pmask = np.stack([_generation_mask(kernel, pioneer, n) for n in range(horizon + 1)])
    distance = None
    if displacement:
        if not kernel.has_metric:
            raise MetricUnavailable(f"kernel {kernel.name!r} has no graph metric")
        origin = kernel.states[start_idx]
        distance = np.array([kernel.metric(s, origin) for s in kernel.states], dtype=np.int64)
    return _CountSpec(tgt, cond, np.array(dist.outcomes, dtype=np.int64),
                      _conditional([m for _, m in dist.weights]), start_idx, horizon, masks, pmask,
                      distance, keep_visits, snapshot, limit)


def _branch_and_step(spec: _CountSpec, C: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    """One generation of a cohort array ``C[replica, state]``."""
    r, s = np.nonzero(C)
    if len(r) == 0:
        return np.zeros_like(C)
    rest = C[r, s]
    children = np.zeros_like(rest)
    for k, p in zip(spec.outcomes, spec.offspring_cond):
        take = rest if p >= 1.0 else gen.binomial(rest, p)
        children += k * take
        rest = rest - take
    new = np.zeros_like(C)
    rest = children
    for j in range(spec.step_targets.shape[1]):
        p = spec.step_cond[s, j]
        take = gen.binomial(rest, np.minimum(p, 1.0))
        rest = rest - take
        tgt = spec.step_targets[s, j]
        ok = (tgt >= 0) & (take > 0)
        np.add.at(new, (r[ok], tgt[ok]), take[ok])
    return new


def _run_count_block(args):
    spec, seed, block, size = args
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))
    H, S = spec.horizon, spec.step_targets.shape[0]
    free = np.zeros((size, S), dtype=np.int64)
    rest = np.zeros((size, S), dtype=np.int64)
    (free if spec.pioneer_mask is not None else rest)[:, spec.start] = 1
    out = {
        "sizes": np.zeros((size, H + 1), dtype=np.int64),
        "hits": {k: np.zeros((size, H + 1), dtype=np.int64) for k in spec.set_masks},
        "pioneers": np.zeros((size, H + 1), dtype=np.int64),
        "displacement": np.full((size, H + 1), -1, dtype=np.int64),
        "capped_at": np.full(size, -1, dtype=np.int64),
        "visits": np.zeros((size, S), dtype=bool) if spec.keep_visits else None,
        "snapshot": None,
        "snapshot_at": np.full(size, -1, dtype=np.int64),
    }
    if spec.snapshot is not None:
        out["snapshot"] = np.zeros((size, int(spec.snapshot.sum())), dtype=bool)
    max_k = int(spec.outcomes.max())
    for n in range(H + 1):
        if spec.pioneer_mask is not None:
            # free particles standing in D are pioneers; they stop being free
            pm = spec.pioneer_mask[n]
            out["pioneers"][:, n] = free[:, pm].sum(axis=1)
            rest[:, pm] += free[:, pm]
            free[:, pm] = 0
        C = free + rest
        out["sizes"][:, n] = C.sum(axis=1)
        for name, mask in spec.set_masks.items():
            out["hits"][name][:, n] = C[:, mask[n]].sum(axis=1)
        if spec.distance is not None:
            out["displacement"][:, n] = np.where(C > 0, spec.distance[None, :], -1).max(axis=1)
        if spec.keep_visits:
            out["visits"] |= C > 0
        if spec.snapshot is not None:
            occ = C[:, spec.snapshot] > 0
            seen = occ.any(axis=1)
            out["snapshot"][seen] = occ[seen]
            out["snapshot_at"][seen] = n
        if n == H:
            break
        over = out["sizes"][:, n] * max_k > spec.limit
        if over.any():
            out["capped_at"][over & (out["capped_at"] < 0)] = n + 1
            free[over] = 0
            rest[over] = 0
        if spec.pioneer_mask is not None:
            free = _branch_and_step(spec, free, gen)
        rest = _branch_and_step(spec, rest, gen)
    return out


@dataclass
class CountResult:
    """Per-replica statistics of an occupancy run (arrays ``[replica, gen]``)."""

    seed: int
    horizon: int
    sizes: np.ndarray
    hits: dict[str, np.ndarray]
    pioneers: np.ndarray | None
    displacement: np.ndarray | None
    capped_at: np.ndarray
    visits: np.ndarray | None = None
    snapshot: np.ndarray | None = None
    snapshot_at: np.ndarray | None = None
    generator: str = COUNT_GENERATOR

    @property
    def replicas(self) -> int:
        return len(self.sizes)

    @property
    def cap_hit(self) -> np.ndarray:
        return self.capped_at >= 0

    @property
    def extinct_at(self) -> np.ndarray:
        out = np.full(self.replicas, -1, dtype=np.int64)
        empty = (self.sizes == 0) & ~self.cap_hit[:, None]
        has = empty.any(axis=1)
        out[has] = empty[has].argmax(axis=1)
        return out

    @property
    def alive_at_horizon(self) -> np.ndarray:
        return (self.sizes[:, -1] > 0) & ~self.cap_hit

    def local_time(self, name: str, n: int | None = None) -> np.ndarray:
        h = self.hits[name]
        return h.sum(axis=1) if n is None else h[:, : n + 1].sum(axis=1)

    def late_local_time(self, name: str, k: int) -> np.ndarray:
        """``L(A_k)``: visits at generations k and later."""
        return self.hits[name][:, k:].sum(axis=1)


def simulate_counts(kernel: Kernel, dist: OffspringDist, start, horizon: int, replicas: int, seed: int = 0,
                    sets: Mapping[str, SpaceTimeSet] | None = None, pioneer: SpaceTimeSet | None = None,
                    displacement: bool = False, keep_visits: bool = False, snapshot=None,
                    block_size: int = 256, workers: int = 1, limit: int = COUNT_LIMIT) -> CountResult:
    """Occupancy-count simulation of ``replicas`` independent runs.

    Replicas are processed in fixed blocks of ``block_size``, block b using
    its own Philox stream, so results do not depend on ``workers``. A run
    whose population could overflow ``limit`` is stopped and flagged.

    ``snapshot`` (a state mask) records, per replica, which of those states
    were occupied at the latest generation occupying any of them.
    """
    if horizon < 0:
        raise SimulationError("horizon must be nonnegative")
    start_idx = _start_index(kernel, start)
    sets = dict(sets or {})
    if snapshot is not None:
        snapshot = np.asarray(snapshot, dtype=bool)
    spec = _count_spec(kernel, dist, start_idx, horizon, sets, pioneer, displacement,
                       keep_visits, snapshot, limit)
    jobs = [(spec, seed, b, min(block_size, replicas - lo))
            for b, lo in enumerate(range(0, replicas, block_size))]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_count_block, jobs))
    else:
        parts = [_run_count_block(j) for j in jobs]

    def cat(key):
        return np.concatenate([p[key] for p in parts]) if parts else None

    return CountResult(
        seed, horizon, cat("sizes"),
        {k: np.concatenate([p["hits"][k] for p in parts]) for k in sets},
        cat("pioneers") if pioneer is not None else None,
        cat("displacement") if displacement else None,
        cat("capped_at"),
        cat("visits") if keep_visits else None,
        cat("snapshot") if snapshot is not None else None,
        cat("snapshot_at"),
    )
