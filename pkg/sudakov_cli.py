"""
Command-line entry point.

Usage:
  python sudakov_cli.py solve problems/ex_2ndmarg.json --out out/ex
  python sudakov_cli.py decompose problems/ex_2ndmarg.json --out out/ex
  python sudakov_cli.py refine | extract-map | verify | render <problem> --out <dir>

Flags override the problem file, which overrides SUDAKOV_* variables.
Exit codes: 0 success, 1 failed invariant or computation error, 2 input error.
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from sudakov.config import load_settings
from sudakov.errors import InputError, SudakovError
from sudakov.logging_setup import configure_logging
from sudakov.pipeline import COMMANDS, run_command
from sudakov.problem_io import parse_problem

OUTPUTS = {
    "solve": ("plan.csv", "plan.json", "mu.csv", "nu.csv", "generators.json"),
    "decompose": ("partition.json",),
    "refine": ("refinement.json",),
    "extract-map": ("map.csv", "map.json"),
    "verify": ("verification.json", "histograms.csv"),
    "render": ("decomposition.svg",),
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("problem", help="Problem file (JSON).")
    common.add_argument("--mode", choices=("rational", "float"), help="Arithmetic backend.")
    common.add_argument("--seed", type=int, help="Seed for generated marginals and sampled checks.")
    common.add_argument("--out", help="Artifact directory (default: the problem's `out`).")
    common.add_argument("--resolution", type=int, help="Grid resolution of the area estimate.")
    common.add_argument("--slack", type=float, help="Relative slack of the area-estimate bound.")
    common.add_argument("--quiet", action="store_true", help="Do not echo warnings to stderr.")

    parser = argparse.ArgumentParser(description="Sudakov decomposition of discrete transport problems.")
    sub = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        sub.add_parser(command, parents=[common], help=f"Run the {command} stage.")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        spec = parse_problem(args.problem)
        if args.seed is not None:
            spec = replace(spec, seed=args.seed)
        overrides = {
            "mode": args.mode or spec.mode,
            "seed": str(spec.seed),
            "resolution": None if args.resolution is None else str(args.resolution),
            "area_slack": None if args.slack is None else str(args.slack),
        }
        settings = load_settings(overrides)
        configure_logging(settings, console=not args.quiet)
        out_dir = Path(args.out) if args.out else spec.resolve(spec.out)
        status = run_command(args.command, spec, settings, out_dir)
    except InputError as exc:
        print(f"[ERROR] {exc}", file=sys.stderr)
        return 2
    except SudakovError as exc:
        print(f"[ERROR] {exc}", file=sys.stderr)
        return 1

    written = ", ".join(name for name in OUTPUTS[args.command] if (out_dir / name).exists())
    if status:
        print(f"[WARN] {args.command}: invariant checks failed; see {out_dir / 'verification.json'}")
    else:
        print(f"[OK] {args.command}: wrote {written} in {out_dir}")
    return status


if __name__ == "__main__":
    raise SystemExit(main())
