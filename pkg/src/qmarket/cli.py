"""Command line entry point: ``qmarket SPEC.json -o results/``.

Exit status is 0 on success, 1 for invalid input and 2 for runtime failures.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import replace

from .errors import MarketError, ParseError, ValidationError
from .io import COMMANDS, load_price_csv, load_run_spec, run, write_result

log = logging.getLogger("qmarket")


def build_parser():
    ap = argparse.ArgumentParser(prog="qmarket", description=__doc__.splitlines()[0])
    ap.add_argument("spec", help="JSON run specification")
    ap.add_argument("-o", "--out", default="results", help="directory for CSV tables and manifest.json")
    ap.add_argument("--prices", help="CSV price table (k,P_1,...,P_L) replacing the run spec's trajectory")
    ap.add_argument("--step", type=float, help="time of transaction for --prices (defaults to the run spec's h)")
    ap.add_argument("--command", choices=COMMANDS, help="override the command named in the run spec")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="[qmarket] %(message)s", stream=sys.stderr)
    try:
        spec = load_run_spec(args.spec)
        if args.prices:
            traj = load_price_csv(args.prices, args.step or spec.trajectory.step)
            if traj.n_share_types != spec.config.n_share_types:
                raise ValidationError("price file has the wrong number of share types")
            spec = replace(spec, trajectory=traj)
        if args.command:
            spec = replace(spec, command=args.command)
    except (ParseError, ValidationError, OSError) as exc:
        print(f"qmarket: invalid input: {exc}", file=sys.stderr)
        return 1
    try:
        start = time.perf_counter()
        record = run(spec)
        manifest = write_result(record, args.out)
        # timing goes to the log only so result files stay byte-identical across runs
        log.info("%s finished in %.3f s -> %s", spec.command, time.perf_counter() - start, manifest)
    except ValidationError as exc:
        print(f"qmarket: invalid input: {exc}", file=sys.stderr)
        return 1
    except (MarketError, ArithmeticError, ValueError, OSError) as exc:
        print(f"qmarket: {spec.command} failed: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
