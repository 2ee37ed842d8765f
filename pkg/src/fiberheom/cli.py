"""Command line entry point: ``fiberheom <experiment> --config FILE``."""
import argparse
import logging
import sys

from .config import ConfigError, Experiment, parse_config
from .experiments import run, write_output

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def build_parser():
    parser = argparse.ArgumentParser(prog="fiberheom", description=__doc__)
    parser.add_argument("experiment", choices=[e.value for e in Experiment])
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", help="CSV output path (metadata goes to <out>.meta.json)")
    parser.add_argument("--workers", type=int, help="parallel worker processes for grid runs")
    parser.add_argument("--nc", type=int, help="hierarchy truncation depth")
    parser.add_argument("--dt", type=float, help="base RK4 step in us")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        overrides = {"experiment": args.experiment, "workers": args.workers, "N_c": args.nc,
                     "dt": args.dt, "output_path": args.out}
        cfg = parse_config(text, overrides)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if cfg.experiment.value != args.experiment:
        print(f"error: config says experiment {cfg.experiment.value!r} but command is "
              f"{args.experiment!r}", file=sys.stderr)
        return EXIT_USAGE
    try:
        result = run(cfg)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if cfg.output_path:
        write_output(result, cfg.output_path)
    else:
        sys.stdout.write(result.csv)
    if result.report:
        print(result.report, file=sys.stderr if not cfg.output_path else sys.stdout)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
