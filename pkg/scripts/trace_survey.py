"""Tally the trace-decomposition properties over sampled geodesics.

Prints one line per property with its pass count and, for each failing
property, the first few replicate indices so they can be inspected.

    python3 scripts/trace_survey.py --n 500 --reps 1000
"""

import argparse
from collections import defaultdict

from abfpp.fpp import first_passage_time
from abfpp.lattice import NoiseField, WeightParams, target_point
from abfpp.seeds import replicate_seed
from abfpp.traces import decompose, trace_properties


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--reps", type=int, default=1000)
    ap.add_argument("--p-lo", type=float, default=0.7)
    ap.add_argument("--p-hi", type=float, default=0.8)
    ap.add_argument("--direction", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=1111)
    args = ap.parse_args(argv)

    target = target_point(args.direction * args.n, args.n)
    passed = defaultdict(int)
    failures = defaultdict(list)
    sub = 0
    for i in range(args.reps):
        p = args.p_lo + (args.p_hi - args.p_lo) * i / max(1, args.reps - 1)
        f, wp = NoiseField(replicate_seed(args.seed, "traces", i)), WeightParams(1.0, 2.0, p)
        geo = first_passage_time(target, f, wp).geodesic
        sub += decompose(geo, f, wp).suboptimal_count
        for k, ok in trace_properties(geo, f, wp, args.n).items():
            passed[k] += ok
            if not ok:
                failures[k].append(i)
    print(f"target {tuple(target)}, mean sub-optimal edges {sub / args.reps:.2f}")
    for k in sorted(passed):
        print(f"{k:18s} {passed[k]}/{args.reps}  first failures: {failures[k][:5]}")


if __name__ == "__main__":
    main()
