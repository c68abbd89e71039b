"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Tolerances are pinned here: 4 standard errors for Monte Carlo agreement,
1e-12 for float engine comparisons, exact refutation in exact mode.
"""

import csv
import io
import time
from fractions import Fraction

import numpy as np
import pytest
import yaml

from conftest import CONFIG_DIR
from germlab import enclosure as enc
from germlab.engine import (
    Mode,
    clamped_pair_iteration,
    germ_bound_check,
    hitting_probability,
    laplace_local_time,
    pioneer_h_recursion,
)
from germlab.lab.config import load_config
from germlab.offspring import OffspringDist, extinction_probability, parse_dist, pgf_eval, random_dist
from germlab.orders import (
    Relation,
    compare_germ,
    compare_icv,
    compare_pgf,
    compare_st,
    germ_threshold,
)
from germlab.simulate import simulate, simulate_batch
from germlab.statespace import SpaceTimeSet, build_lattice, space_time_lift

Z = 4.0
FLOAT_TOL = 1e-12
LE = (Relation.LESS, Relation.EQUAL)


def _shift_up(rng, mu: OffspringDist) -> OffspringDist:
    """Move the whole mass of one atom to a larger outcome (stochastically larger law)."""
    w = dict(mu.weights)
    k = int(rng.choice([k for k in w if k < 7] or list(w)))
    if k >= 7:
        return mu
    j = int(rng.integers(k + 1, 8))
    w[j] = w.get(j, Fraction(0)) + w.pop(k)
    return OffspringDist(w)


def _data(path):
    text = path.read_text()
    return list(csv.DictReader(io.StringIO("\n".join(l for l in text.splitlines() if not l.startswith("#")))))


def _header(path):
    out = {}
    for line in path.read_text().splitlines():
        if line.startswith("# ") and not line.startswith("#   ") and ":" in line:
            k, v = line[2:].split(":", 1)
            out[k.strip()] = v.strip()
    return out


def test_1_order_hierarchy(verdict):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    violations = pairs = 0
    hits = {"st": 0, "icv": 0, "pgf": 0}
    for i in range(1500):
        mu = random_dist(rng)
        nu = random_dist(rng) if i % 3 else _shift_up(rng, mu)
        st, icv = compare_st(mu, nu).relation, compare_icv(mu, nu).relation
        pgf, germ = compare_pgf(mu, nu).relation, compare_germ(mu, nu).relation
        pairs += 1
        hits["st"] += st is Relation.LESS
        hits["icv"] += icv in LE
        hits["pgf"] += pgf in LE
        violations += (st is Relation.LESS and icv not in LE) + (icv in LE and pgf not in LE) \
            + (pgf in LE and germ not in LE)
    secs = time.perf_counter() - start
    verdict(1, violations == 0 and pairs >= 1000 and secs < 60,
            f"{pairs} pairs, {violations} violations, antecedents st={hits['st']} icv={hits['icv']} "
            f"pgf={hits['pgf']}, {secs:.1f}s")


def test_2_strictness_witness(verdict):
    mu, nu = parse_dist("{1:1}"), parse_dist("{0:1/4,2:3/4}")
    pgf, germ = compare_pgf(mu, nu).relation, compare_germ(mu, nu).relation
    thr = germ_threshold(mu, nu)
    ok = pgf is Relation.INCOMPARABLE and germ is Relation.LESS and thr.alpha == Fraction(1, 3) and thr.tight
    verdict(2, ok, f"pgf {pgf}, germ {germ}, threshold {thr.alpha} (tight={thr.tight})")


def _signs(mu, nu, last=64):
    out = []
    for j in range(1, last + 1):
        d = pgf_eval(mu, 1 - Fraction(1, 2**j)) - pgf_eval(nu, 1 - Fraction(1, 2**j))
        out.append((d > 0) - (d < 0))
    return out


def _settled_sign(signs):
    """Sign from the first j <= 60 after which it never changes (through j = 64)."""
    for j in range(60):
        if len(set(signs[j:])) == 1:
            return signs[j]
    return None


def _window_sign(signs):
    """Sign at the first j <= 60 that agrees with the next four."""
    for j in range(60):
        if len(set(signs[j: j + 5])) == 1:
            return signs[j]
    return None


def test_3_moment_lexicography(verdict):
    rng = np.random.default_rng(3)
    disagree = undecided = window_disagree = 0
    relation = {1: Relation.LESS, -1: Relation.GREATER, 0: Relation.EQUAL}
    for i in range(500):
        mu = random_dist(rng)
        if i % 2:
            nu = random_dist(rng)
        else:
            # mean-preserving spread: matches the first factorial moment
            w = dict(mu.weights)
            inner = [k for k in w if 0 < k < 7]
            if not inner:
                nu = random_dist(rng)
            else:
                k = int(rng.choice(inner))
                half = w[k] / 2
                w[k] -= half
                w[k - 1] = w.get(k - 1, Fraction(0)) + half / 2
                w[k + 1] = w.get(k + 1, Fraction(0)) + half / 2
                nu = OffspringDist(w)
        signs = _signs(mu, nu)
        got = compare_germ(mu, nu).relation
        window = _window_sign(signs)
        window_disagree += window is not None and got is not relation[window]
        sign = _settled_sign(signs)
        if sign is None:
            undecided += 1
            continue
        disagree += got is not relation[sign]
    # the 5-window reading can lock onto a sign that flips again closer to 1
    verdict(3, disagree == 0 and undecided == 0,
            f"500 pairs, {disagree} disagreements with the settled sign, {undecided} unsettled by j=60; "
            f"first-5-window reading disagrees on {window_disagree}")


def test_4_extinction(verdict):
    q = extinction_probability(parse_dist("{0:1/4,2:3/4}")).q
    start = time.perf_counter()
    k = build_lattice(1, 10, "reflect")
    res = simulate_batch(k, parse_dist("{0:1/4,2:3/4}"), 0, 200, 10_000, seed=4, cap=1000)
    freq = float((res.extinct_at >= 0).mean())
    se = np.sqrt(1 / 3 * 2 / 3 / 10_000)
    secs = time.perf_counter() - start
    ok = q == Fraction(1, 3) and abs(freq - 1 / 3) <= Z * se and secs < 60
    verdict(4, ok, f"q = {q}, simulated {freq:.4f} (|z| = {abs(freq - 1 / 3) / se:.2f}), {secs:.1f}s")


def _pgf_less_pair(rng):
    while True:
        mu = random_dist(rng)
        nu = random_dist(rng) if rng.random() < 0.5 else _shift_up(rng, mu)
        if compare_pgf(mu, nu).relation is Relation.LESS:
            return mu, nu


def test_5_pgf_recursion_inequality(verdict):
    rng = np.random.default_rng(5)
    k = build_lattice(1, 10)
    A = SpaceTimeSet.origin(k)
    start = time.perf_counter()
    violations = checks = strict_st = 0
    for _ in range(50):
        mu, nu = _pgf_less_pair(rng)
        strict_st += compare_st(mu, nu).relation is not Relation.LESS
        t = Fraction(int(rng.integers(1, 20)), 20)
        fm = laplace_local_time(k, mu, A, t, 30, Mode.EXACT)
        fn = laplace_local_time(k, nu, A, t, 30, Mode.EXACT)
        for a, b in zip(fm, fn):
            for hi_mu, lo_nu in zip(a.upper, b.lower):
                checks += 1
                violations += enc.cmp(hi_mu, lo_nu) < 0
    secs = time.perf_counter() - start
    verdict(5, violations == 0 and secs < 300,
            f"50 pairs ({strict_st} not st-ordered), {checks} state-generation checks, "
            f"{violations} refuted, {secs:.1f}s")


CLAMPED = sorted(p.name for p in CONFIG_DIR.glob("clamped_*.yaml"))


def test_6_clamped_chain(verdict, shipped):
    details, ok = [], True
    for name in CLAMPED:
        code, out, _ = shipped(name)
        (path,) = out.glob("recurse-*.csv") or out.glob("*.csv")
        meta = _header(path)
        sec = load_config(CONFIG_DIR / name)
        kernel = sec.kernel()
        mode = Mode(sec.string("mode", "float"))
        F, G, thr = clamped_pair_iteration(
            kernel, sec.dist("mu"), sec.dist("nu"), sec.space_set("set", kernel, SpaceTimeSet.origin(kernel)),
            sec.int("horizon"), alpha=sec.fraction("alpha", None), mode=mode)
        a = float(thr.alpha)
        chain = all(np.all(a - FLOAT_TOL <= g.lower_float) and np.all(g.lower_float <= f.upper_float + FLOAT_TOL)
                    and np.all(f.upper_float <= 1 + FLOAT_TOL) for f, g in zip(F.fields, G.fields))
        down = all(np.all(x.lower_float <= y.upper_float + FLOAT_TOL)
                   for seq in (F.fields, G.fields) for x, y in zip(seq[1:], seq))
        residual = max(F.residual, G.residual)
        this = code == 0 and chain and down and residual <= 1e-10 and meta.get("status") == "ok" \
            and float(meta["F_residual"]) <= 1e-10 and float(meta["G_residual"]) <= 1e-10
        ok &= this
        details.append(f"{name} residual {residual:.1e}")
    verdict(6, ok, "; ".join(details))


def _germ_instance(rng):
    while True:
        mu, nu = random_dist(rng, max_outcome=5), random_dist(rng, max_outcome=5)
        if compare_germ(mu, nu).relation is Relation.LESS:
            thr = germ_threshold(mu, nu)
            if thr.alpha > 0:
                return mu, nu, thr


@pytest.mark.parametrize("mode", ["float", "exact"])
def test_7_g_upper_bound(verdict, mode):
    rng = np.random.default_rng(7)
    worst, ok = np.inf, True
    for i in range(10):
        mu, nu, thr = _germ_instance(rng)
        k = build_lattice(1, int(rng.integers(3, 11)))
        A = SpaceTimeSet.origin(k) if i % 2 else SpaceTimeSet.halfspace(1)
        if mode == "float":
            _, G, _ = clamped_pair_iteration(k, mu, nu, A, 20, mode="float")
            L = laplace_local_time(k, nu, A, float(thr.alpha), 20, "float")
            margin = min(float(np.min(g.values - np.maximum(float(thr.alpha), l.values)))
                         for g, l in zip(G.fields, L))
            ok &= margin >= -FLOAT_TOL
        else:
            margin = germ_bound_check(k, mu, nu, A, 20, mode="exact").min_margin_i
            ok &= margin >= 0
        worst = min(worst, margin)
    verdict(7, ok, f"{mode} mode: 10 instances, min margin {worst:.3g}")


def test_8_pioneer_identity(verdict):
    k = build_lattice(1, 10)
    D = SpaceTimeSet.halfspace(4)
    alpha = Fraction(1, 3)
    h = hitting_probability(k, D)
    H = pioneer_h_recursion(k, parse_dist("{1:1}"), D, alpha, 6000)[-1].values
    lin = float(np.max(np.abs(H - (1 - (1 - float(alpha)) * h))))

    kb = build_lattice(1, 5)
    Db = SpaceTimeSet.halfspace(2)
    n, a = 10, 0.5
    nu = parse_dist("{0:1/4,2:3/4}")
    Hn = pioneer_h_recursion(kb, nu, Db, Fraction(1, 2), n)[n].values[kb.index[0]]
    res = simulate_batch(kb, nu, 0, n, 10_000, seed=8, cap=10**6, pioneer_sets={"D": Db})
    sample = a ** res.pioneer_count("D", n).astype(float)
    se = sample.std(ddof=1) / np.sqrt(len(sample))
    z = abs(sample.mean() - Hn) / se
    ok = lin <= FLOAT_TOL and z <= Z and not res.cap_hit.any()
    verdict(8, ok, f"atom 1 max error {lin:.1e}; branching H_n(0) = {Hn:.5f} vs {sample.mean():.5f} "
                   f"(|z| = {z:.2f})")


def test_9_engine_simulator_agreement(verdict):
    rng = np.random.default_rng(9)
    zs, ok = [], True
    for i in range(10):
        while True:
            mu = random_dist(rng, max_outcome=3)
            n = int(rng.integers(3, 9))
            if float(mu.mean) ** n <= 2000:
                break
        d = 1 + i % 2
        k = build_lattice(d, int(rng.integers(2, 7 if d == 1 else 4)))
        A = [SpaceTimeSet.origin(k), SpaceTimeSet.halfspace(1), SpaceTimeSet.of_states(list(k.states[::3]))][i % 3]
        t = Fraction(int(rng.integers(1, 10)), 10)
        exact = laplace_local_time(k, mu, A, t, n)[n].values[k.index[k.origin]]
        res = simulate_batch(k, mu, k.origin, n, 10_000, seed=100 + i, cap=10**6, sets={"A": A})
        sample = float(t) ** res.local_time("A", n).astype(float)
        se = sample.std(ddof=1) / np.sqrt(len(sample))
        z = abs(sample.mean() - exact) / se if se > 0 else (0.0 if abs(sample.mean() - exact) < FLOAT_TOL else np.inf)
        zs.append(z)
        ok &= z <= Z and not res.cap_hit.any()
    verdict(9, ok, f"10 instances, max |z| = {max(zs):.2f}")


def test_10_space_time_coupling(verdict):
    rng = np.random.default_rng(10)
    mismatches = 0
    for _ in range(100):
        d = int(rng.integers(1, 3))
        base = build_lattice(d, int(rng.integers(2, 6)), str(rng.choice(["kill", "reflect"])))
        mu = random_dist(rng, max_outcome=3)
        H = int(rng.integers(2, 9))
        seed, replica = int(rng.integers(0, 2**62)), int(rng.integers(0, 10**6))
        a = simulate(base, mu, base.origin, H, cap=5000, seed=seed, replica=replica)
        b = simulate(space_time_lift(base, H), mu, (base.origin, 0), H, cap=5000, seed=seed, replica=replica)
        same = a.sizes == b.sizes and a.extinct_at == b.extinct_at and a.cap_hit == b.cap_hit
        same = same and all([s for s, _ in b.labels(n)] == a.labels(n) for n in range(len(a.sizes)))
        mismatches += not same
    verdict(10, mismatches == 0, f"100 configs, {mismatches} mismatches")


def test_11_monotonicity_experiment(verdict, shipped):
    code, out, secs = shipped("monotonicity_origin.yaml")
    rows = _data(out / "monotonicity_origin.csv")
    claims = [r for r in rows if r["section"] == "claim"]
    hits = [r for r in claims if r["quantity"].startswith("P_nu(")]
    audit = [float(r["value"]) for r in rows if r["section"] == "audit"]
    ok = code == 0 and hits and all(r["note"] == "pass" for r in hits) and audit \
        and max(audit) < 1e-3 and secs < 600
    verdict(11, ok, f"{len(hits)} hit-count claims pass under the 4-SE rule, audit max relative change "
                    f"{max(audit):.1e}, {secs:.1f}s")


def test_12_dyadic_experiment(verdict, shipped):
    cfg = yaml.safe_load((CONFIG_DIR / "dyadic.yaml").read_text())
    code, out, secs = shipped("dyadic.yaml")
    rows = [r for r in _data(out / f"{cfg.get('name', 'dyadic')}.csv") if r["section"] == "box"]
    dim = {r["arm"]: float(r["value"]) for r in rows}
    by_law = {str(parse_dist(str(cfg[arm]))): dim[arm] for arm in dim}
    two, one = by_law["{2:1}"], by_law["{1:1}"]
    ok = code == 0 and abs(two - 1) <= 0.1 and one <= 0.1
    verdict(12, ok, f"depth 12: atom 2 gives {two:.3f}, atom 1 gives {one:.3f}, {secs:.1f}s")
