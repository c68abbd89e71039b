"""Dispatch config entries to engine runs, simulations and experiments."""

from __future__ import annotations

import copy
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

from germlab import __version__
from germlab import rng as srng
from germlab.engine import ChainViolation, Mode, clamped_pair_iteration, laplace_local_time, pioneer_h_recursion
from germlab.lab.config import Section, load_config
from germlab.lab.experiments import EXPERIMENTS
from germlab.lab.report import COLUMNS, Claim, Report, fmt, write_csv
from germlab.offspring import extinction_probability, format_dist
from germlab.orders import HIERARCHY, Relation, compare, germ_threshold
from germlab.simulate import simulate_batch
from germlab.statespace import SpaceTimeSet, set_from_spec

ENGINES = ("laplace", "clamped", "pioneer")
EXIT_OK, EXIT_CONFIG, EXIT_ASSERT = 0, 2, 3


def _mode(sec: Section) -> Mode:
    return Mode(sec.string("mode", "float", choices={"float", "exact"}))


def _label(state) -> str:
    return str(state)


def _field_rows(fields, kernel, exact: bool, prefix=()):
    for f in fields:
        for i, s in enumerate(kernel.states):
            row = [*prefix, f.generation, _label(s), float(f.values[i])]
            if exact:
                v = f[s]
                row.append(v if isinstance(v, Fraction) else "")
            yield row


def recurse_command(sec: Section) -> Report:
    """Finite-horizon fields of one of the deterministic recursions."""
    engine = sec.string("engine", choices=set(ENGINES))
    kernel = sec.kernel()
    mode = _mode(sec)
    n = sec.int("horizon", minimum=0)
    exact = mode is Mode.EXACT
    cols = ["generation", "state_label", "value"] + (["exact"] if exact else [])
    rep = Report(sec.raw("name", f"recurse-{engine}"), "recurse", cols)
    rep.meta["engine"] = engine
    rep.meta["mode"] = mode.value
    if engine == "laplace":
        A = sec.space_set("set", kernel, SpaceTimeSet.origin(kernel))
        t = sec.fraction("t")
        fields = laplace_local_time(kernel, sec.dist("mu"), A, t, n, mode)
        rep.rows.extend(_field_rows(fields, kernel, exact))
    elif engine == "pioneer":
        D = sec.space_set("set", kernel, SpaceTimeSet.origin(kernel))
        fields = pioneer_h_recursion(kernel, sec.dist("mu"), D, sec.fraction("alpha"), n, mode)
        rep.rows.extend(_field_rows(fields, kernel, exact))
    else:
        A = sec.space_set("set", kernel, SpaceTimeSet.origin(kernel))
        alpha = sec.fraction("alpha", None)
        stride = sec.int("stride", max(1, n // 20), minimum=1)
        rep.columns = ["sequence"] + cols
        F, G, thr = clamped_pair_iteration(kernel, sec.dist("mu"), sec.dist("nu"), A, n, alpha=alpha,
                                           mode=mode, stride=stride)
        rep.meta["alpha"] = fmt(thr.alpha)
        rep.meta["alpha_tight"] = thr.tight
        for name, it in (("F", F), ("G", G)):
            rep.rows.extend(_field_rows(it.fields, kernel, exact, (name,)))
            rep.claim(Claim(f"{name} fixed-point residual <= {it.tolerance:g}", it.tolerance - it.residual, 0.0))
            rep.claim(Claim(f"{name} sup-norm steps nonincreasing", 0.0 if it.deltas_nonincreasing else -1.0,
                            0.0, hard=False))
            rep.meta[f"{name}_residual"] = fmt(it.residual)
        rep.meta["chain"] = "alpha <= G_n <= F_n <= 1 and monotone decrease checked at every step"
    return rep


def compare_command(sec: Section) -> Report:
    mu, nu = sec.dist("mu"), sec.dist("nu")
    orders = sec.get("order", lambda v: list(HIERARCHY) if v == "all" else [v] if isinstance(v, str) else list(v),
                     list(HIERARCHY))
    for o in orders:
        if o not in HIERARCHY:
            raise sec.error(f"unknown order {o!r}; expected one of {list(HIERARCHY)} or 'all'", "order")
    rep = Report(sec.raw("name", "compare"), "compare", ["order", "relation", "witness", "alpha", "alpha_tight"])
    for o in orders:
        v = compare(o, mu, nu)
        alpha = tight = ""
        if o == "germ" and v.relation is Relation.LESS:
            thr = germ_threshold(mu, nu)
            alpha, tight = thr.alpha, thr.tight
        rep.add(o, str(v.relation), "" if v.witness is None else str(v.witness), alpha, tight)
    rep.meta["mu"], rep.meta["nu"] = format_dist(mu), format_dist(nu)
    return rep


def extinction_command(sec: Section) -> Report:
    raw = sec.raw("dist")
    rep = Report(sec.raw("name", "extinction"), "extinction", ["dist", "q", "exact", "survival", "degenerate"])
    for item in raw if isinstance(raw, list) else [raw]:
        d = Section({"dist": item}, sec.path, sec.lines, sec.source).dist("dist")
        r = extinction_probability(d)
        rep.add(format_dist(d), r.q, r.exact, r.survival, r.degenerate)
    return rep


def simulate_command(sec: Section) -> Report:
    """Per-replica summaries of particle simulations."""
    kernel = sec.kernel()
    dist = sec.dist("dist") if "dist" in sec else sec.dist("mu")
    start = sec.state("start", kernel, None)
    H = sec.int("horizon", minimum=0)
    replicas = sec.int("replicas", 100, minimum=1)
    seed = sec.int("seed", 0, minimum=0)
    cap = sec.int("cap", 100_000, minimum=1)

    def named(key):
        out = {}
        for i, s in enumerate(sec.sections(key)):
            try:
                A = set_from_spec(s.data, kernel)
            except KeyError as exc:
                raise s.error("required field is missing", exc.args[0]) from None
            except (ValueError, TypeError) as exc:
                raise s.error(str(exc)) from None
            name = str(s.data.get("name", A.name))
            out[name if name not in out else f"{name}#{i}"] = A
        return out

    sets, pioneers = named("sets"), named("pioneer_sets")
    disp = sec.boolean("displacement", kernel.has_metric)
    res = simulate_batch(kernel, dist, start, H, replicas, seed=seed, cap=cap, sets=sets,
                         pioneer_sets=pioneers, displacement=disp)
    cols = ["replica", "extinct_at", "cap_hit", "final_size"]
    cols += [f"L({k})" for k in sets] + [f"E({k})" for k in pioneers]
    if disp:
        cols += ["M_max", "M_final"]
    rep = Report(sec.raw("name", "simulate"), "simulate", cols)
    rep.meta.update({"seed": seed, "replicas": replicas, "cap": cap, "generator": srng.GENERATOR_NAME})
    final = res.sizes[:, -1]
    for i, r in enumerate(res.replicas):
        row = [int(r), int(res.extinct_at[i]) if res.extinct_at[i] >= 0 else "",
               bool(res.cap_hit[i]), int(final[i])]
        row += [int(res.local_time(k)[i]) for k in sets]
        row += [int(res.pioneer_count(k)[i]) for k in pioneers]
        if disp:
            d = res.displacement[i]
            row += [int(d.max()), int(d[-1]) if d[-1] >= 0 else ""]
        rep.add(*row)
    return rep


COMMANDS: dict[str, Callable[[Section], Report]] = {
    "compare": compare_command,
    "extinction": extinction_command,
    "recurse": recurse_command,
    "simulate": simulate_command,
    **EXPERIMENTS,
}
SHARED = ("seed", "replicas", "mode", "workers", "block_size")


@dataclass
class RunResult:
    exit_code: int
    reports: list[Report] = field(default_factory=list)
    outputs: list[Path] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)


def entries(root: Section, kinds=None, default_kind: str | None = None) -> list[Section]:
    """Config entries: an ``experiments`` list, or the document itself."""
    if "experiments" in root:
        items = root.sections("experiments")
        shared = {k: v for k, v in root.data.items() if k in SHARED}
        for item in items:
            for k, v in shared.items():
                item.data.setdefault(k, v)
    else:
        items = [root]
    for item in items:
        if "kind" not in item and default_kind is not None:
            item.data["kind"] = default_kind
        kind = item.string("kind", choices=set(COMMANDS))
        if kinds is not None and kind not in kinds:
            raise item.error(f"kind {kind!r} cannot run under this command (expected {sorted(kinds)})", "kind")
    return items


def _meta(command: str, item: Section, rep: Report) -> dict:
    meta = {"germlab": __version__, "command": command, "kind": rep.kind, "name": rep.name}
    meta.update(rep.meta)
    meta["config"] = item.echo()
    meta["status"] = "ok" if rep.ok else "failed"
    for c in rep.claims:
        status = "pass" if c.passed else ("FAIL" if c.hard else "flag")
        meta.setdefault("claims", [])
        meta["claims"].append(f"{c.label} | margin {fmt(c.margin)} | tolerance {fmt(c.tolerance)} | {status}")
    if "claims" in meta:
        meta["claims"] = "\n".join(meta["claims"])
    return meta


def _rows(rep: Report):
    yield from rep.rows
    if rep.columns == COLUMNS:
        yield from rep.claim_rows()


def run(config: Section | str | Path, out: str | Path | None = None, *, command: str = "experiment",
        kinds=None, overrides: dict | None = None, default_kind: str | None = None,
        stream=None) -> RunResult:
    """Run every entry of a config; returns the exit code and the reports.

    Outputs go to ``out/<name>.csv`` (plus ``out/summary.csv``) when ``out``
    is a directory, to ``out`` itself for a single entry and a ``.csv`` path,
    and to ``stream`` (stdout) when ``out`` is None.
    """
    root = config if isinstance(config, Section) else load_config(config)
    root = Section(copy.deepcopy(root.data), root.path, root.lines, root.source)
    items = entries(root, kinds, default_kind)
    for item in items:
        for k, v in (overrides or {}).items():
            if v is not None:
                item.data[k] = v
    stream = stream if stream is not None else sys.stdout
    single_file = out is not None and str(out).endswith(".csv") and len(items) == 1
    result = RunResult(EXIT_OK)
    names: list[str] = []
    summary = []
    for i, item in enumerate(items):
        kind = item.data["kind"]
        try:
            rep = COMMANDS[kind](item)
        except ChainViolation as exc:
            rep = Report(item.data.get("name", kind), kind)
            rep.claim(Claim(f"clamped chain: {exc}", -1.0, 0.0))
        name = str(rep.name)
        if name in names:
            name = f"{name}-{i}"
        names.append(name)
        rep.name = name
        result.reports.append(rep)
        meta = _meta(command, item, rep)
        rows = list(_rows(rep))
        if out is None:
            stream.write(write_csv(None, meta, rep.columns, rows))
        else:
            path = Path(out) if single_file else Path(out) / f"{name}.csv"
            write_csv(path, meta, rep.columns, rows)
            result.outputs.append(path)
        summary.append([name, kind, "ok" if rep.ok else "failed", len(rep.claims),
                        sum(not c.passed for c in rep.claims if c.hard)])
        if not rep.ok:
            result.exit_code = EXIT_ASSERT
            result.errors.extend(f"{name}: {c.label} (margin {c.margin:.3g}, tolerance {c.tolerance:.3g})"
                                 for c in rep.claims if c.hard and not c.passed)
    if out is not None and not single_file:
        meta = {"germlab": __version__, "command": command, "config": root.echo(),
                "status": "ok" if result.exit_code == EXIT_OK else "failed"}
        path = Path(out) / "summary.csv"
        write_csv(path, meta, ["name", "kind", "status", "claims", "failed"], summary)
        result.outputs.append(path)
    return result

