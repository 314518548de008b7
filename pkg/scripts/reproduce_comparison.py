#!/usr/bin/env python
"""
Desk-scale method comparison on simulated Kolmogorov screens.

Runs every method over a seed range, prints the comparison table and checks
the expected rankings: classical methods, pyramid methods, the Shack-Hartmann
subaperture trade-off and the Fourier-type sensor kinds. Exits 1 if any
ranking does not hold.
"""

import argparse
import logging
import math
import os
import sys

sys.path.append(os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "src"))

from backend.pipeline.config import RunConfig  # noqa: E402
from backend.pipeline.progress_tracker import CompareProgressTracker  # noqa: E402
from backend.pipeline.runner import compare, format_table, simulated_cases  # noqa: E402
from backend.optics.grid_io import write_bytes_atomic  # noqa: E402

logger = logging.getLogger("reproduce_comparison")

METHODS = ["columnwise", "mrp", "pe", "p4_linear", "p4_nope",
           "sh@n_sub=8", "sh@n_sub=16", "sh@n_sub=32",
           "fourier:pyramid3", "fourier:roof", "fourier:cone", "fourier:iquad"]

# (name, [(lower, higher), ...]) on mean relative error
RANKINGS = [
    ("classical", [("pe", "mrp"), ("mrp", "columnwise")]),
    ("pyramid", [("p4_nope", "p4_linear"), ("p4_linear", "pe")]),
    ("subapertures", [("sh@n_sub=16", "sh@n_sub=8"), ("sh@n_sub=16", "sh@n_sub=32")]),
    ("fourier kinds", [(a, b) for a in ("fourier:pyramid3", "fourier:roof")
                       for b in ("fourier:cone", "fourier:iquad")]),
]
P4_NOPE_BAND = 35.0


def check_rankings(errors):
    """Return the list of failed checks."""
    failures = []
    for name, pairs in RANKINGS:
        for lower, higher in pairs:
            ok = errors[lower] < errors[higher]
            logger.info(f"[{name}] {lower} ({errors[lower]:.2f}%) < {higher} ({errors[higher]:.2f}%): "
                        f"{'ok' if ok else 'FAILED'}")
            if not ok:
                failures.append(f"{name}: {lower} < {higher}")
    if not errors["p4_nope"] <= P4_NOPE_BAND:
        failures.append(f"p4_nope above {P4_NOPE_BAND}%")
    return failures


def main():
    parser = argparse.ArgumentParser(description="Compare unwrapping methods on simulated screens")
    parser.add_argument("--seeds", type=int, default=10, help="Number of seeds (default: 10)")
    parser.add_argument("--n", type=int, default=128, help="Grid size (default: 128)")
    parser.add_argument("--r0", type=float, default=8.0, help="Fried parameter in pixels (default: 8)")
    parser.add_argument("--noise", type=float, default=0.2, help="Relative noise level (default: 0.2)")
    parser.add_argument("--c", type=float, default=math.pi / 2, help="Sensor scale (default: pi/2)")
    parser.add_argument("--threads", type=int, default=None, help="Worker count (default: DWFS_THREADS)")
    parser.add_argument("--output", default=None, help="Directory for the table, grids and progress file")
    args = parser.parse_args()

    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')

    config = RunConfig(n=args.n, r0=args.r0, noise=args.noise, c=args.c)
    cases = simulated_cases(config, range(args.seeds))
    tracker = CompareProgressTracker(args.output) if args.output else None
    rows = compare(METHODS, cases, config, output_dir=args.output, threads=args.threads, tracker=tracker)

    table = format_table(rows)
    print(table, end="")
    if args.output:
        write_bytes_atomic(os.path.join(args.output, "compare.tsv"), table.encode("utf-8"))

    broken = [row.method for row in rows if row.status != "ok"]
    if broken:
        logger.error(f"Methods with failed cells: {', '.join(broken)}")
        return 1
    failures = check_rankings({row.method: row.stats("rel_error")[0] for row in rows})
    if failures:
        for failure in failures:
            logger.error(f"Ranking not reproduced: {failure}")
        return 1
    print(f"All rankings reproduced over {args.seeds} seeds")
    return 0


if __name__ == "__main__":
    sys.exit(main())
