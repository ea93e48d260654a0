"""Command line: ``densitylab {evolve,bohm,grw,entropy,equiv,iph} --config C [--out D] [--seed S]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import CONFIG_SCHEMA, SUBCOMMANDS
from .experiments import run_experiment

HELP = {
    "evolve": "exact evolution of a state with snapshots and observables",
    "bohm": "equivariance test of density-matrix guided trajectories",
    "grw": "spontaneous-collapse runs with flash logs",
    "entropy": "macrostate weights and entropy from an initial projection",
    "equiv": "W-guided versus psi-guided ensembles of a mixture",
    "iph": "normalized projector onto a subspace",
}


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="densitylab", description=__doc__)
    p.add_argument("--schema", action="store_true", help="print the config JSON schema and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command")
    for name in SUBCOMMANDS:
        s = sub.add_parser(name, help=HELP[name])
        s.add_argument("--config", required=True, help="experiment config (JSON)")
        s.add_argument("--out", help="output directory (overrides output_dir)")
        s.add_argument("--seed", type=int, help="master seed (overrides the config)")
    return p


def main(argv=None) -> int:
    p = parser()
    try:
        args = p.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.schema:
        print(json.dumps(CONFIG_SCHEMA, indent=1, sort_keys=True))
        return 0
    if args.command is None:
        p.print_usage(sys.stderr)
        return 2
    return run_experiment(args.config, args.out, args.seed, SUBCOMMANDS[args.command])


if __name__ == "__main__":
    sys.exit(main())
