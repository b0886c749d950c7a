"""Right-edge speed versus p from both estimators, written as CSV.

    python3 scripts/alpha_curve.py --p 0.7 0.75 0.8 0.85 0.9 --n 2000 --reps 200 --out alpha.csv
"""

import argparse
import csv
import logging
import sys

from abfpp.lattice import WeightParams
from abfpp.oriented import breakpoint_runs, estimate_alpha_slope, ratio_from_runs
from abfpp.seeds import default_workers

log = logging.getLogger("alpha_curve")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=float, nargs="+", default=[0.7, 0.75, 0.8, 0.85, 0.9])
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--horizon", type=int, default=500)
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=default_workers())
    ap.add_argument("--out", default="-")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)

    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["p", "n", "horizon", "slope", "slope_se", "ratio", "ratio_se", "kappa", "kappa_se", "rejected"])
    for p in args.p:
        wp = WeightParams(1.0, 2.0, p)
        slope = estimate_alpha_slope(wp, args.n, args.reps, args.seed, args.workers)
        ratio, kappa = ratio_from_runs(breakpoint_runs(wp, args.n, args.horizon, args.reps, args.seed, args.workers))
        log.info("p=%.3f slope %.4f ratio %.4f", p, slope.mean, ratio.mean)
        w.writerow([p, args.n, args.horizon, *(format(v, ".17g") for v in
                    (slope.mean, slope.stderr, ratio.mean, ratio.stderr, kappa.mean, kappa.stderr)),
                    ratio.excluded])
    if fh is not sys.stdout:
        fh.close()


if __name__ == "__main__":
    main()
