"""
Residual mass of the first partition as the two-disc sample grows.

Usage:
  python tools/residual_scaling_report.py
  python tools/residual_scaling_report.py --sizes 50 100 200 --seed 3 --plan solve

For each size n both discs get n random samples; targets are the T+ image
and the decomposition is taken relative to the chosen plan. The residual
mass should not grow with n. Exit code 1 when it does.
"""

import argparse
import sys
from pathlib import Path

PROJECT_ROOT = Path(__file__).resolve().parents[1]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from sudakov.config import load_settings  # noqa: E402
from sudakov.logging_setup import configure_logging  # noqa: E402
from sudakov.measure_verify import residual_scaling  # noqa: E402
from sudakov.pipeline import load_problem, stage_decompose, stage_solve  # noqa: E402
from sudakov.problem_io import ProblemSpec  # noqa: E402


def two_disc_spec(count, seed, plan):
    disc = {"kind": "disc", "radius": 1, "count": count, "method": "random"}
    return ProblemSpec(
        name=f"ex_2ndmarg_n{count}",
        cost="linf",
        mu={"kind": "union", "parts": [dict(disc, center=[-2, 0]), dict(disc, center=[2, 0])]},
        nu={"kind": "pushforward", "of": "mu", "map": "T+"},
        seed=seed,
        plan=plan,
    )


def main():
    parser = argparse.ArgumentParser(description="Residual-mass scaling on the two-disc example.")
    parser.add_argument("--sizes", type=int, nargs="+", default=[50, 100, 200], help="Samples per disc.")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--plan", choices=("T+", "solve"), default="T+")
    args = parser.parse_args()

    settings = load_settings({"mode": "float", "seed": str(args.seed)})
    configure_logging(settings)

    def build(count):
        art = load_problem(two_disc_spec(count, args.seed, args.plan), settings)
        stage_solve(art)
        part = stage_decompose(art)
        print(f"[INFO] n={count}: {len(part.classes)} classes, {len(part.residual)} residual sources")
        return part

    report = residual_scaling(args.sizes, build)
    print("n,residual_mass")
    for n, mass in report.rows:
        print(f"{n},{mass:.6g}")
    if not report.monotone:
        print("[WARN] residual mass grew with the sample size")
        return 1
    print("[OK] residual mass is non-increasing")
    return 0


if __name__ == "__main__":
    try:
        raise SystemExit(main())
    except Exception as exc:
        print(f"[ERROR] {exc}", file=sys.stderr)
        raise
