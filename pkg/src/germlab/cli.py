"""Command line entry point: ``germlab compare|extinction|recurse|simulate|experiment``."""

from __future__ import annotations

import argparse
import sys

from germlab import __version__
from germlab.lab.config import ConfigError, Section, load_config
from germlab.lab.runner import ENGINES, EXIT_CONFIG, run
from germlab.orders import HIERARCHY

KINDS = {
    "compare": {"compare"},
    "extinction": {"extinction"},
    "recurse": {"recurse"},
    "simulate": {"simulate"},
    "experiment": None,
}


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON config document")
    common.add_argument("--out", help="output directory, or a .csv path for a single entry (default: stdout)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--replicas", type=int, help="override the config replica count")
    common.add_argument("--mode", choices=("exact", "float"), help="arithmetic for the engine arms")

    p = argparse.ArgumentParser(prog="germlab", description="Offspring-law orders and branching Markov processes.")
    p.add_argument("--version", action="version", version=f"germlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compare", parents=[common], help="compare two offspring laws")
    c.add_argument("--order", choices=(*HIERARCHY, "all"))
    c.add_argument("--mu", help="distribution literal such as {0:1/4,2:3/4}")
    c.add_argument("--nu")

    e = sub.add_parser("extinction", parents=[common], help="extinction probability of an offspring law")
    e.add_argument("--dist", action="append", help="distribution literal (repeatable)")

    r = sub.add_parser("recurse", parents=[common], help="run a deterministic recursion")
    r.add_argument("--engine", choices=ENGINES)

    s = sub.add_parser("simulate", parents=[common], help="per-replica particle simulations")
    s.add_argument("--workers", type=int)

    x = sub.add_parser("experiment", parents=[common], help="run configured experiments")
    x.add_argument("--workers", type=int)
    return p


def _config(args) -> Section:
    if args.config:
        return load_config(args.config)
    data = {"kind": args.command}
    if args.command == "compare":
        for key in ("mu", "nu"):
            if getattr(args, key) is None:
                raise ConfigError(f"--{key} is required without --config", field=key)
            data[key] = getattr(args, key)
        data["order"] = args.order or "all"
        return Section(data, source="command line")
    if args.command == "extinction":
        if not args.dist:
            raise ConfigError("--dist is required without --config", field="dist")
        data["dist"] = args.dist
        return Section(data, source="command line")
    raise ConfigError(f"{args.command} needs --config")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    overrides = {"seed": args.seed, "replicas": args.replicas, "mode": args.mode,
                 "workers": getattr(args, "workers", None)}
    if args.command == "recurse":
        overrides["engine"] = args.engine
    if args.command == "compare" and args.config:
        overrides.update(mu=args.mu, nu=args.nu, order=args.order)
    try:
        cfg = _config(args)
        result = run(cfg, args.out, command=args.command, kinds=KINDS[args.command],
                     overrides=overrides, default_kind=args.command if args.command != "experiment" else None)
    except ValueError as exc:
        # ConfigError, malformed literals, unmet order preconditions and domain errors
        print(f"germlab: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for line in result.errors:
        print(f"germlab: assertion failed: {line}", file=sys.stderr)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
