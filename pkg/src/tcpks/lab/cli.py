"""Command-line entry point: ``tcpks {simulate,sweep,verify-lemmas,fit-rates}``."""

import argparse
import logging
import os
import sys
from dataclasses import replace

from ..errors import TcpksError
from . import commands
from .config import parse_config

EXIT_ERROR = 1


def build_parser():
    parser = argparse.ArgumentParser(prog="tcpks", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("simulate", "integrate one run and classify it (exit 0 bounded, 2 blown-up, 3 undecided)"),
        ("sweep", "decay-rate sweep over A x k (linear-model) or classification sweep over A x M"),
        ("verify-lemmas", "check the elliptic inequalities on random profiles"),
        ("fit-rates", "re-fit per-mode decay rates from an existing series.csv"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="PATH", help="key=value configuration file")
        p.add_argument("--out", metavar="DIR", help="output directory (overrides the config)")
        p.add_argument("--seed", type=int, help="random seed (overrides the config)")
        if name == "simulate":
            p.add_argument("--resume", metavar="CHECKPOINT", help="continue from a checkpoint file")
        if name == "sweep":
            p.add_argument("--workers", type=int, default=None,
                           help="worker processes (default: number of CPUs)")
        if name == "fit-rates":
            p.add_argument("--series", metavar="CSV", help="series.csv to fit (default: OUT/series.csv)")
    return parser


def _load_config(args):
    text = ""
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    cfg = parse_config(text, command=args.command)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.out:
        cfg = replace(cfg, out=args.out)
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load_config(args)
        if args.command == "simulate":
            return commands.cmd_simulate(cfg, cfg.out, resume=args.resume)
        if args.command == "sweep":
            return commands.cmd_sweep(cfg, cfg.out, workers=args.workers)
        if args.command == "verify-lemmas":
            return commands.cmd_verify_lemmas(cfg, cfg.out)
        series = args.series or os.path.join(cfg.out, "series.csv")
        return commands.cmd_fit_rates(series, cfg.out, cfg.fit_window)
    except (TcpksError, OSError) as exc:
        print(f"tcpks {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
