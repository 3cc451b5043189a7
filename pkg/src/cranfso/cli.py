"""Command-line entry point: ``cranfso <experiment> [options]``.

Exit codes: 0 success, 1 usage error, 2 check failure, 3 solver error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .experiments import RUNNERS, ExperimentSpec, pairs_from
from .optimizer import InfeasibleAllocation, SubproblemError, Variant
from .rates import Detector, Quantizer
from .sysmodel import ConfigError, SystemConfig, load_config, validate

EXIT_OK, EXIT_USAGE, EXIT_CHECK, EXIT_SOLVER = 0, 1, 2, 3

log = logging.getLogger("cranfso")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for failed checks here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _float_list(text: str) -> tuple:
    try:
        vals = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _int_list(text: str) -> tuple:
    vals = _float_list(text)
    if any(v != int(v) or v < 1 for v in vals):
        raise argparse.ArgumentTypeError(f"expected positive integers: {text!r}")
    return tuple(int(v) for v in vals)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML file of SystemConfig fields")
    common.add_argument("--seed", type=_u64, help="master seed (default: config rng_seed)")
    common.add_argument("--blocks", type=_positive,
                        help="channel blocks (default 100; 1 for sweep-alpha)")
    common.add_argument("--scheme", choices=["avq", "rvq", "dsc", "all"],
                        help="quantizer (default all; rvq for sum-rate)")
    common.add_argument("--detector", choices=["mmse", "sic", "all"], default="all")
    common.add_argument("--kappa", type=_float_list,
                        help="comma-separated FSO attenuation values in dB/km")
    common.add_argument("--variant", choices=[v.value for v in Variant], default="maco")
    common.add_argument("--out", type=Path, help="output CSV (default: stdout)")
    common.add_argument("--workers", type=_positive, default=1, help="worker processes")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="cranfso", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("sweep-alpha", parents=[common],
                   help="sum rate over the access time fraction, with the search optimum")
    rr = sub.add_parser("rate-region", parents=[common],
                        help="weighted-sum-optimal rate pairs and the virtual-MAC bound")
    rr.add_argument("--mu-points", type=_positive, default=11,
                    help="points on the first user's weight grid")
    sr = sub.add_parser("sum-rate", parents=[common], help="sum rate versus user power")
    sr.add_argument("--powers", type=_float_list, default=(0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0),
                    help="user transmit powers in dBm")
    sr.add_argument("--antennas", type=_int_list, help="RU antenna counts (default: config N)")
    sub.add_parser("oracle-check", parents=[common],
                   help="pipeline against independent oracles; exit 2 on failure")
    return p


def _resolve(args) -> tuple[SystemConfig, ExperimentSpec]:
    try:
        cfg = load_config(args.config) if args.config else SystemConfig()
    except (OSError, ConfigError) as exc:
        raise UsageError(str(exc)) from exc
    seed = cfg.rng_seed if args.seed is None else args.seed
    cfg = cfg.replace(rng_seed=seed)
    scheme = args.scheme or ("rvq" if args.command == "sum-rate" else "all")
    quantizers = [q.value for q in Quantizer] if scheme == "all" else [scheme]
    detectors = [d.value for d in Detector] if args.detector == "all" else [args.detector]
    for q in quantizers:
        bad = validate(cfg, q)
        if bad:
            raise UsageError("invalid config: " + "; ".join(bad))
    if args.kappa and any(k < 0 for k in args.kappa):
        raise UsageError("kappa must be nonnegative")
    if args.command == "rate-region" and cfg.K < 2:
        raise UsageError("rate-region needs K >= 2")
    blocks = args.blocks or (1 if args.command == "sweep-alpha" else 100)
    extra = {}
    if args.command == "rate-region":
        if args.mu_points < 2:
            raise UsageError("--mu-points must be at least 2")
        extra["mu_points"] = args.mu_points
    if args.command == "sum-rate":
        extra["powers_dbm"] = tuple(args.powers)
        extra["antennas"] = tuple(args.antennas or ())
    spec = ExperimentSpec(kind=args.command, pairs=pairs_from(quantizers, detectors),
                          kappas=tuple(args.kappa or ()), blocks=blocks, seed=seed,
                          variant=Variant(args.variant), **extra)
    return cfg, spec


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg, spec = _resolve(args)
    except UsageError as exc:
        print(f"cranfso: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    log.info("running %s with %d block(s), seed %d", spec.kind, spec.blocks, spec.seed)
    try:
        with np.errstate(all="ignore"):
            table = RUNNERS[args.command](cfg, spec, workers=args.workers)
    except (SubproblemError, InfeasibleAllocation, np.linalg.LinAlgError) as exc:
        print(f"cranfso: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    text = table.to_csv()
    if args.out:
        try:
            args.out.parent.mkdir(parents=True, exist_ok=True)
            args.out.write_text(text)
        except OSError as exc:
            print(f"cranfso: cannot write {args.out}: {exc}", file=sys.stderr)
            return EXIT_USAGE
    else:
        sys.stdout.write(text)
    if table.exit_code:
        failed = [r[0] for r in table.rows if r[-1] == "FAIL"]
        print("cranfso: failed checks: " + ", ".join(failed), file=sys.stderr)
    return table.exit_code


if __name__ == "__main__":
    sys.exit(main())
