"""``sim <experiment> [--config PATH] [--seed N] [--drops N] [--out DIR] [--override k=v]...``"""

from __future__ import annotations

import argparse
import logging
import sys

from ..errors import ConfigError, InvalidParameterError
from .config import EXPERIMENTS, load_config
from .experiments import run_experiment
from .results import emit_results

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3

log = logging.getLogger("ltesim")


def build_parser():
    p = argparse.ArgumentParser(prog="sim", description="Run one system-level experiment.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="TOML config file")
    p.add_argument("--seed", type=int, help="64-bit seed (overrides the config)")
    p.add_argument("--drops", type=int, help="number of Monte-Carlo drops")
    p.add_argument("--out", default=".", help="output directory (must exist)")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted config key, e.g. mu_gain.n_rb=6 (repeatable)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors, which is also our config code
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.override, experiment=args.experiment,
                          seed=args.seed, n_drops=args.drops)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    log.info("running %s: %d drops, seed %d", cfg.experiment, cfg.n_drops, cfg.seed)
    try:
        table = run_experiment(cfg)
    except InvalidParameterError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        csv_path, gp_path = emit_results(table, args.out)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(csv_path)
    print(gp_path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
