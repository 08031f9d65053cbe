"""Command line entry point: ``grazingmodes <subcommand> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import SUBCOMMANDS, RunConfig, load_config
from .errors import GrazingModesError


def build_parser():
    parser = argparse.ArgumentParser(prog="grazingmodes", description=__doc__)
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key=value settings file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--cache", help="directory for binary mode caches")
        p.add_argument("--n", type=int, help="lattice half-width N")
        p.add_argument("--eps", help="comma separated, strictly decreasing epsilon list")
        p.add_argument("--evaluator", choices=("direct", "fast", "both"))
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="extra setting")
    return parser


def make_config(args):
    settings = load_config(args.config) if args.config else {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise SystemExit(f"--set expects KEY=VALUE, got {item!r}")
        settings[key.strip()] = value.strip()
    if args.n is not None:
        settings["N"] = str(args.n)
    if args.eps is not None:
        settings["eps"] = args.eps
    if args.evaluator is not None:
        settings["evaluator"] = args.evaluator
    seed = args.seed if args.seed is not None else int(settings.pop("seed", 0))
    settings.pop("seed", None)
    cache = args.cache or settings.pop("cache", None)
    settings.pop("cache", None)
    return RunConfig(args.subcommand, settings, out=args.out, cache=cache, seed=seed)


def main(argv=None):
    from .experiments import RUNNERS

    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = make_config(args)
        return RUNNERS[cfg.subcommand](cfg)
    except GrazingModesError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
