"""Command line entry point: ``thermochain <subcommand> [--config PATH] [--seed N] [--out DIR]``.

Exit codes: 0 success, 1 validation failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import experiments
from .config import ConfigError, load, resolve

SUBCOMMANDS = {
    "coeffs": "interface coefficient table",
    "kinetic": "deterministic kinetic solve",
    "mc": "Monte Carlo particle solve",
    "chain": "microscopic ensemble and Wigner estimate",
    "converge": "eps -> 0 convergence table d(eps)",
    "validate": "run the invariant suite",
}


def build_parser():
    ap = argparse.ArgumentParser(prog="thermochain", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in SUBCOMMANDS.items():
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="JSON config file (defaults used when omitted)")
        sp.add_argument("--seed", type=int, help="master seed (u64), overrides the config")
        sp.add_argument("--out", help="output directory (must exist), overrides the config")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name == "validate":
            sp.add_argument("--full", action="store_true", help="include the slow checks")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load(args.config) if args.config else resolve({})
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg["seed"] = args.seed
        if args.out is not None:
            cfg["output_dir"] = args.out
        out = cfg["output_dir"]
        if args.command == "validate":
            from .validation import run_suite
            ok = run_suite(cfg, full=args.full, out=out if args.out else None)
            return 0 if ok else 1
        runner = {
            "coeffs": experiments.run_coeffs,
            "kinetic": experiments.run_kinetic,
            "mc": experiments.run_mc_cmd,
            "chain": experiments.run_chain,
            "converge": experiments.run_converge,
        }[args.command]
        result = runner(cfg, out)
        if args.command == "converge":
            for r in result:
                print(f"eps={r.eps:.6g} d={r.d:.6g}")
        return 0
    except (ConfigError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
