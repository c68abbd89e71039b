"""Config-driven experiments comparing two offspring laws on one kernel.

Each experiment runs a ``mu`` arm and a ``nu`` arm with the same seed and
reports survival-conditioned statistics. Survival is approximated by being
alive (and not stopped by the overflow guard) at the horizon. Every ordering
claim is a direction check at 4 standard errors (see
:func:`germlab.lab.report.ci_claim`); none asserts a strict inequality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from germlab.engine import Mode, laplace_local_time
from germlab.lab.config import Section
from germlab.lab.report import Claim, Estimate, Report, ci_claim
from germlab.offspring import OffspringDist, format_dist, is_supercritical
from germlab.orders import NotGermLess, Relation, compare_germ, compare_pgf
from germlab.simulate import COUNT_GENERATOR, simulate_counts
from germlab.statespace import (
    RATE_FUNCTIONS,
    EmbeddingUnavailable,
    Kernel,
    MetricUnavailable,
    SpaceTimeSet,
    TreeKernel,
    kernel_from_spec,
    space_time_lift,
)

ARMS = ("mu", "nu")
AUDIT_TOL = 1e-3
ENGINE_TOL = 1e-12


@dataclass
class Common:
    """Run settings shared by all experiments."""

    seed: int
    replicas: int
    mode: Mode
    workers: int
    block_size: int

    @classmethod
    def read(cls, sec: Section, replicas: int = 1000) -> "Common":
        return cls(sec.int("seed", 0, minimum=0), sec.int("replicas", replicas, minimum=1),
                   Mode(sec.string("mode", "float", choices={"float", "exact"})),
                   sec.int("workers", 1, minimum=1), sec.int("block_size", 256, minimum=1))

    def counts(self, kernel, dist, start, horizon, **kw):
        return simulate_counts(kernel, dist, start, horizon, self.replicas, seed=self.seed,
                               block_size=self.block_size, workers=self.workers, **kw)

    def meta(self) -> dict:
        return {"seed": self.seed, "replicas": self.replicas, "mode": self.mode.value,
                "generator": COUNT_GENERATOR}


def _germ_pair(sec: Section, mu_key="mu", nu_key="nu") -> tuple[OffspringDist, OffspringDist]:
    mu, nu = sec.dist(mu_key), sec.dist(nu_key)
    verdict = compare_germ(mu, nu)
    if verdict.relation not in (Relation.LESS, Relation.EQUAL):
        raise NotGermLess(f"{mu_key}={format_dist(mu)} is not germ-below {nu_key}={format_dist(nu)} "
                          f"(germ verdict {verdict.relation})")
    return mu, nu


def _late_class(p: float, delta: float) -> str:
    if p >= 1 - delta:
        return "recurrent-like"
    if p <= delta:
        return "transient-like"
    return "indeterminate"


def _engine_values(kernel: Kernel, dist, A: SpaceTimeSet, start, ts, horizon, mode):
    """``E_start[t**L_horizon(A)]`` for each t, with its enclosure radius."""
    if A.time_invariant:
        K, B, s = kernel, A, start
    else:
        K, B, s = space_time_lift(kernel, horizon + 1), A.on_lift(), (start, 0)
    out = []
    for t in ts:
        f = laplace_local_time(K, dist, B, t, horizon, mode)[-1]
        lo, hi = f.lower_float[K.index[s]], f.upper_float[K.index[s]]
        out.append((float(f.values[K.index[s]]), lo, hi, (hi - lo) / 2))
    return out


def _double_window(kernel: Kernel) -> Kernel | None:
    spec = dict(kernel.spec or {})
    if spec.get("kind") not in ("lattice", "tree"):
        return None
    spec["R"] = 2 * int(spec["R"])
    return kernel_from_spec(spec)


def monotonicity_experiment(sec: Section) -> Report:
    """Hit counts of one space-time set under the two laws."""
    common = Common.read(sec, replicas=10_000)
    kernel = sec.kernel()
    mu, nu = _germ_pair(sec)
    for key, d in (("mu", mu), ("nu", nu)):
        if not is_supercritical(d):
            raise sec.error(f"{format_dist(d)} is not supercritical", key)
    A = sec.space_set("set", kernel, SpaceTimeSet.origin(kernel))
    start = sec.state("start", kernel, None)
    H = sec.int("horizon", minimum=1)
    ts = sec.get("t", lambda v: [Fraction(str(x)) for x in (v if isinstance(v, list) else [v])],
                 [Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)])
    if any(not 0 < t <= 1 for t in ts):
        raise sec.error("every t must lie in (0, 1]", "t")
    ms = sec.get("thresholds", lambda v: [int(x) for x in v], [4**j for j in range(11)])
    late = sec.number("late_fraction", 0.5)
    delta = sec.number("delta", 0.05)
    audit = sec.boolean("audit", True)

    rep = Report(sec.raw("name", "monotonicity"), "monotonicity")
    rep.meta.update(common.meta())
    rep.meta["germ"] = str(compare_germ(mu, nu).relation)

    # engine arm
    pgf_ordered = compare_pgf(mu, nu).is_less_or_equal
    values = {arm: _engine_values(kernel, d, A, start, ts, H, common.mode) for arm, d in zip(ARMS, (mu, nu))}
    for arm in ARMS:
        for t, (v, _lo, _hi, rad) in zip(ts, values[arm]):
            rep.add("engine", arm, f"E[t^L_{H}(A)] t={t}", v, rad, "", "enclosure radius")
    for t, (_, lo_mu, _, _), (_, _, hi_nu, _) in zip(ts, values["mu"], values["nu"]):
        if pgf_ordered:
            tol = 0.0 if common.mode is Mode.EXACT else ENGINE_TOL
            rep.claim(Claim(f"engine E_mu >= E_nu at t={t}", lo_mu - hi_nu, tol))
    if audit:
        wide = _double_window(kernel)
        if wide is None:
            rep.add("audit", "", "window doubling", "", "", "", "kernel has no radius; skipped")
        else:
            for arm, d in zip(ARMS, (mu, nu)):
                doubled = _engine_values(wide, d, A, start, ts, H, common.mode)
                for t, (v, *_), (w, *_) in zip(ts, values[arm], doubled):
                    rel = abs(w - v) / max(abs(v), 1e-300)
                    rep.add("audit", arm, f"relative change t={t} R={kernel.spec['R']}->{wide.spec['R']}",
                            rel, "", "", "")
                    rep.claim(Claim(f"audit {arm} t={t} moves < {AUDIT_TOL}", AUDIT_TOL - rel, 0.0, hard=False))

    # Monte Carlo arm
    k = int(late * H)
    late_set = A.from_generation(k)
    stats = {}
    for arm, d in zip(ARMS, (mu, nu)):
        res = common.counts(kernel, d, start, H, sets={"A": A, "late": late_set})
        surv = res.alive_at_horizon
        L = res.local_time("A")[surv]
        stats[arm] = (res, surv, L)
        rep.estimate("mc", arm, "P(survive to horizon)", Estimate.frequency(surv))
        rep.add("mc", arm, "capped runs", int(res.cap_hit.sum()), "", res.replicas, "excluded")
        rep.estimate("mc", arm, "E[L(A)] | survive", Estimate.of(L))
        for m in ms:
            rep.estimate("mc", arm, f"P(L(A)>={m}) | survive", Estimate.frequency(L >= m))
        p_late = Estimate.frequency(res.local_time("late")[surv] > 0)
        rep.estimate("trichotomy", arm, f"P(L(A_{k})>0) | survive", p_late,
                     _late_class(p_late.value, delta) if p_late.count else "no survivors")
    for m in ms:
        e = {arm: Estimate.frequency(stats[arm][2] >= m) for arm in ARMS}
        rep.claim(ci_claim(f"P_nu(L(A)>={m}) >= P_mu(L(A)>={m})", e["nu"], e["mu"]))
    rep.meta["trichotomy"] = f"late start k={k}, delta={delta}"
    return rep


def displacement_experiment(sec: Section) -> Report:
    """``M_n / f(n)`` surrogates and hits of the displacement set."""
    common = Common.read(sec, replicas=2000)
    H = sec.int("horizon", minimum=2)
    kernel = sec.kernel() if "kernel" in sec else kernel_from_spec({"kind": "lattice", "d": 1, "R": H})
    if not kernel.has_metric:
        raise MetricUnavailable(f"kernel {kernel.name!r} has no graph metric")
    mu, nu = _germ_pair(sec)
    f_name = sec.string("f", "n", choices=set(RATE_FUNCTIONS))
    rate = RATE_FUNCTIONS[f_name]
    level = sec.number("level", 1.0)
    tail = sec.number("tail_fraction", 0.5)
    start = sec.state("start", kernel, None)
    A = SpaceTimeSet.displacement(kernel, level, f_name, start)

    rep = Report(sec.raw("name", "displacement"), "displacement")
    rep.meta.update(common.meta())
    k0 = max(1, int(tail * H))
    gens = np.arange(k0, H + 1)
    scale = np.array([rate(n) for n in gens])
    ok = scale > 0
    finals, hits = {}, {}
    sup_all = -math.inf
    for arm, d in zip(ARMS, (mu, nu)):
        res = common.counts(kernel, d, start, H, sets={"A": A}, displacement=True)
        surv = res.alive_at_horizon
        ratio = res.displacement[surv][:, gens[ok]] / scale[ok]
        finals[arm] = Estimate.of(ratio[:, -1]) if len(ratio) else Estimate.of([])
        hits[arm] = Estimate.frequency(res.local_time("A")[surv] > 0)
        rep.estimate("mc", arm, "P(survive to horizon)", Estimate.frequency(surv))
        rep.estimate("mc", arm, f"M_{H}/f({H}) | survive", finals[arm])
        if len(ratio):
            rep.estimate("mc", arm, "liminf surrogate | survive", Estimate.of(ratio.min(axis=1)),
                         f"min over n in [{k0},{H}]")
            rep.estimate("mc", arm, "limsup surrogate | survive", Estimate.of(ratio.max(axis=1)),
                         f"max over n in [{k0},{H}]")
            sup_all = max(sup_all, float(ratio.max()))
        rep.estimate("mc", arm, f"P(L(A)>0) A=displacement({level},{f_name}) | survive", hits[arm])
    rep.claim(ci_claim(f"nu M_{H}/f({H}) >= mu", finals["nu"], finals["mu"]))
    rep.claim(ci_claim("P_nu(L(A)>0) >= P_mu(L(A)>0)", hits["nu"], hits["mu"]))
    if f_name == "n" and sup_all > -math.inf:
        rep.claim(Claim("speed bound M_n/n <= 1", 1.0 - sup_all, 0.0))
    return rep


def intersection_experiment(sec: Section) -> Report:
    """States visited by both of two independent processes."""
    common = Common.read(sec, replicas=2000)
    kernel = sec.kernel()
    pairs = []
    for i in (1, 2):
        pairs.append(_germ_pair(sec, f"mu{i}", f"nu{i}"))
    H = sec.int("horizon", minimum=1)
    start = sec.state("start", kernel, None)
    ms = sec.get("thresholds", lambda v: [int(x) for x in v], None)
    seeds = np.random.SeedSequence(common.seed).generate_state(2, dtype=np.uint64)

    rep = Report(sec.raw("name", "intersection"), "intersection")
    rep.meta.update(common.meta())
    rep.meta["process_seeds"] = [int(s) for s in seeds]
    counts = {}
    for a, arm in enumerate(ARMS):
        visits, alive = [], []
        for i in range(2):
            run = Common(int(seeds[i]), common.replicas, common.mode, common.workers, common.block_size)
            res = run.counts(kernel, pairs[i][a], start, H, keep_visits=True)
            visits.append(res.visits)
            alive.append(res.alive_at_horizon)
        both = alive[0] & alive[1]
        common_visits = (visits[0] & visits[1]).sum(axis=1)
        counts[arm] = common_visits[both]
        rep.estimate("mc", arm, "P(both survive)", Estimate.frequency(both))
        rep.estimate("mc", arm, "E[common states]", Estimate.of(common_visits), "all runs")
        rep.estimate("mc", arm, "E[common states] | both survive", Estimate.of(counts[arm]))
    if ms is None:
        top = max((int(c.max()) for c in counts.values() if len(c)), default=1)
        ms = sorted({max(1, round(top * q)) for q in (0.1, 0.25, 0.5, 0.75, 0.9, 1.0)})
    for m in ms:
        e = {arm: Estimate.frequency(counts[arm] >= m) for arm in ARMS}
        for arm in ARMS:
            rep.estimate("mc", arm, f"P(common>={m}) | both survive", e[arm])
        rep.claim(ci_claim(f"P_nu(common>={m}) >= P_mu(common>={m})", e["nu"], e["mu"]))
    rep.claim(ci_claim("E_nu[common] >= E_mu[common]", Estimate.of(counts["nu"]), Estimate.of(counts["mu"])))
    return rep


def _units(kernel: TreeKernel, depth_mask: np.ndarray) -> np.ndarray:
    """Left ends of the depth-K shadows on the grid of mesh ``1/(3 2**(K+1))``."""
    depth_states = [kernel.states[i] for i in np.flatnonzero(depth_mask)]
    return np.array([4 * kernel.shadow(v)[0] for v in depth_states], dtype=np.int64)


def dyadic_cover_experiment(sec: Section) -> Report:
    """Hits of random enlarged dyadic cube sets and a box-counting surrogate."""
    common = Common.read(sec, replicas=200)
    kernel = sec.kernel() if "kernel" in sec else kernel_from_spec(
        {"kind": "tree", "b": 2, "R": sec.int("depth", 12, minimum=1), "boundary": "reflect"})
    if not isinstance(kernel, TreeKernel) or kernel.b != 2:
        raise EmbeddingUnavailable("the dyadic embedding needs a binary tree kernel (kind tree, b=2)")
    K = kernel.depth
    if K > 16:
        raise sec.error(f"depth {K} exceeds 16", "kernel")
    mu, nu = _germ_pair(sec)
    alpha = sec.number("alpha")
    H = sec.int("horizon", 5 * K, minimum=1)
    start = sec.state("start", kernel, None)

    units = 3 * 2 ** (K + 1)
    depth_mask = np.array([len(v) == K for v in kernel.states])
    left = _units(kernel, depth_mask)
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(common.seed, spawn_key=(0xD1,))))
    cubes = []  # per level: list over replicas of (lo, hi) unit ranges of enlarged cubes
    for k in range(1, K + 1):
        p = 2.0 ** (-alpha * k)
        step = 3 * 2 ** (K - k)
        level = []
        for _ in range(common.replicas):
            j = np.flatnonzero(gen.random(2**k) < p)
            level.append((np.clip((2 * j - 1) * step, 0, units), np.clip((2 * j + 3) * step, 0, units)))
        cubes.append(level)

    rep = Report(sec.raw("name", "dyadic"), "dyadic")
    rep.meta.update(common.meta())
    rep.meta["embedding"] = "tree boundary to [0,1], first edge in thirds then binary halves"
    rep.meta["cube_sets"] = f"level k cubes kept with probability 2^(-{alpha} k); shared by both arms"
    totals, dims = {}, {}
    for arm, d in zip(ARMS, (mu, nu)):
        res = common.counts(kernel, d, start, H, snapshot=depth_mask)
        surv = res.alive_at_horizon
        hit_k = np.zeros((common.replicas, K), dtype=bool)
        dim = np.full(common.replicas, np.nan)
        for r in range(common.replicas):
            if res.snapshot_at[r] < 0:
                continue
            cover = np.zeros(units + 1, dtype=np.int64)
            lo = left[res.snapshot[r]]
            np.add.at(cover, lo, 1)
            np.add.at(cover, lo + 4, -1)
            covered = np.cumsum(cover)[:units] > 0
            prefix = np.concatenate(([0], np.cumsum(covered)))
            boxes = int(((prefix[6::6] - prefix[:-6:6]) > 0).sum())
            dim[r] = math.log2(boxes) / K
            for k in range(K):
                a, b = cubes[k][r]
                hit_k[r, k] = bool(np.any(prefix[b] - prefix[a] > 0))
        have = surv & ~np.isnan(dim)
        totals[arm] = Estimate.of(hit_k[surv].sum(axis=1))
        dims[arm] = Estimate.of(dim[have])
        rep.estimate("mc", arm, "P(survive to horizon)", Estimate.frequency(surv))
        rep.estimate("box", arm, f"log2 N({K}) / {K} | survive", dims[arm], "box-counting surrogate")
        rep.estimate("cubes", arm, "levels k hit by R'_k | survive", totals[arm])
        for k in range(K):
            rep.estimate("cubes", arm, f"P(hit R'_{k + 1}) | survive", Estimate.frequency(hit_k[surv, k]))
    rep.claim(ci_claim("nu levels hit >= mu levels hit", totals["nu"], totals["mu"]))
    return rep


EXPERIMENTS = {
    "monotonicity": monotonicity_experiment,
    "displacement": displacement_experiment,
    "intersection": intersection_experiment,
    "dyadic": dyadic_cover_experiment,
}
