"""
Command-line front end.

    gjms qcurv --level 1 --geometry equator-s2-in-s3
    gjms verify factorization --geometry clifford-torus
    gjms spectrum --k 2 --l 2 --mmax 3

Exit codes: 0 pass, 2 tolerance failure, 3 inadmissible parameters,
4 parse/spec error or malformed command line, 5 numeric singularity.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from app.api.middleware.logging import event_logger
from app.config import settings
from gjms.errors import GJMSError, GeometrySpecError
from gjms.runner import VERIFY_TARGETS, RunOptions, VerificationRunner

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_TOLERANCE = 2
EXIT_USAGE = GeometrySpecError.exit_code


def _common(parser: argparse.ArgumentParser, geometry: bool = True) -> None:
    if geometry:
        parser.add_argument("--geometry", required=True, help="built-in name, 'perturbed-random' or a JSON file")
    parser.add_argument("--tol", type=float, help=f"relative tolerance (default {settings.tolerance:g})")
    parser.add_argument("--seed", type=int, help="seed for sample points and random inputs")
    parser.add_argument("--points", type=int, help="number of sample points")
    parser.add_argument("--order", type=int, help="jet order of the ambient expansion")
    parser.add_argument("--trials", type=int, help="random functions / conformal factors per point")
    parser.add_argument("--workers", type=int, dest="max_workers", help="threads for per-point work")
    parser.add_argument("--format", choices=("json", "csv"), default=None, dest="fmt")
    parser.add_argument("--out", type=Path, help="write the report here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gjms", description="Extrinsic GJMS operators of submanifolds")
    parser.add_argument("--log-level", default=settings.log_level)
    commands = parser.add_subparsers(dest="command", required=True)

    _common(commands.add_parser("curvature", help="ambient curvature tensors at sample points"))
    _common(commands.add_parser("extrinsic", help="second fundamental form and mean curvature"))

    qcurv = commands.add_parser("qcurv", help="extrinsic Q-curvature")
    qcurv.add_argument("--level", type=int, choices=(1, 2), default=1)
    _common(qcurv)

    apply = commands.add_parser("apply", help="apply P2, P4 (or factorized P6) to a function")
    apply.add_argument("--level", type=int, choices=(1, 2, 3), default=2)
    apply.add_argument("--f", help="function of x1..xk; random when omitted")
    _common(apply)

    verify = commands.add_parser("verify", help="check an identity over sample points")
    verify.add_argument("target", choices=VERIFY_TARGETS)
    verify.add_argument("--level", type=int, choices=(1, 2))
    verify.add_argument("--f", help="fixed test function instead of random ones")
    _common(verify)

    spectrum = commands.add_parser("spectrum", help="factorized eigenvalues on round spheres")
    spectrum.add_argument("--k", type=int, required=True)
    spectrum.add_argument("--l", type=int, required=True)
    spectrum.add_argument("--mmax", type=int, default=4)
    spectrum.add_argument("--lam", type=float)
    _common(spectrum, geometry=False)

    geometries = commands.add_parser("geometries", help="list built-in geometries")
    _common(geometries, geometry=False)
    return parser


def _options(args: argparse.Namespace) -> RunOptions:
    overrides = {
        name: getattr(args, name, None)
        for name in ("tol", "seed", "points", "order", "trials", "max_workers", "level", "f", "k", "l", "mmax", "lam")
    }
    overrides["target"] = getattr(args, "target", None)
    return RunOptions.from_settings(settings, **overrides)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors, which is the tolerance-failure code here
        return EXIT_USAGE if e.code else EXIT_PASS
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO), stream=sys.stderr)

    options = _options(args)
    geometry = getattr(args, "geometry", None)
    event_logger.log_command_started(args.command, geometry, options.target)
    try:
        report = VerificationRunner(options).run(args.command, geometry)
    except GJMSError as e:
        event_logger.log_error(args.command, e)
        sys.stderr.write(json.dumps(e.to_dict()) + "\n")
        return e.exit_code
    event_logger.log_report(report)

    fmt = args.fmt or settings.report_format
    if args.out is not None:
        report.write(args.out, fmt)
        logger.info(f"Report written to {args.out}")
    else:
        sys.stdout.write(report.to_csv() if fmt == "csv" else report.to_json())
    return EXIT_PASS if report.passed else EXIT_TOLERANCE


if __name__ == "__main__":
    sys.exit(main())
