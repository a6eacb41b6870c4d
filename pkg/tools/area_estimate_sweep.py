"""
Inner area estimate on the wedge {|x2| <= x1} at doubling grid resolutions.

Usage:
  python tools/area_estimate_sweep.py
  python tools/area_estimate_sweep.py --resolutions 25 50 100 200 --slack 0.05 --h 1

The set S is the box [1/2, 1] x [-1/4, 1/4] at level 1 (the segment [1/2, 1]
for --h 1); rays converge to a focal point at level 1/4 and are cut at 1/2,
so the bound is (1/3)^h up to the slack.

The estimate counts homothety images of grid cells of the box. The wedge only
places the focal point; its shape does not change the count.
"""

import argparse
import sys
from fractions import Fraction
from pathlib import Path

PROJECT_ROOT = Path(__file__).resolve().parents[1]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from sudakov.cone_geometry import Cone  # noqa: E402
from sudakov.config import load_settings  # noqa: E402
from sudakov.logging_setup import configure_logging  # noqa: E402
from sudakov.measure_verify import area_estimate_sweep  # noqa: E402
from sudakov.numeric import EXACT  # noqa: E402


def wedge(h):
    if h == 1:
        return Cone.from_inequalities([(1, 0), (0, 1)], [], 2, EXACT), ((Fraction(1, 2),), (Fraction(1),))
    cone = Cone.from_inequalities([(1, 0, 0), (0, 1, -1), (0, 1, 1)], [], 3, EXACT)
    return cone, ((Fraction(1, 2), Fraction(-1, 4)), (Fraction(1), Fraction(1, 4)))


def main():
    parser = argparse.ArgumentParser(description="Area-estimate sweep over grid resolutions.")
    parser.add_argument("--resolutions", type=int, nargs="+", default=[25, 50, 100, 200])
    parser.add_argument("--slack", type=float, help="Relative slack (default SUDAKOV_AREA_SLACK).")
    parser.add_argument("--h", type=int, choices=(1, 2), default=2, help="Section dimension of the wedge.")
    args = parser.parse_args()

    settings = load_settings({"area_slack": None if args.slack is None else str(args.slack)})
    configure_logging(settings)
    cone, region = wedge(args.h)
    report = area_estimate_sweep(cone, region, 1, Fraction(1, 2), Fraction(1, 4), args.resolutions, settings.area_slack)

    print("resolution,cells,inner,ratio,bound,passed")
    for est in report.estimates:
        print(f"{est.resolution},{est.size},{est.inner_count},{float(est.ratio):.6f},{est.bound:.6f},{est.passed}")
    failed = [est.resolution for est in report.estimates if not est.passed]
    if failed:
        print(f"[WARN] bound missed at resolutions {failed}")
    if not report.monotone:
        print("[WARN] measured ratio dropped when the resolution doubled")
    if failed or not report.monotone:
        return 1
    print("[OK] bound holds and the ratio is monotone")
    return 0


if __name__ == "__main__":
    try:
        raise SystemExit(main())
    except Exception as exc:
        print(f"[ERROR] {exc}", file=sys.stderr)
        raise
