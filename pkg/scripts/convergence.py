"""Refinement trace of the upper and lower bounds for a few budgets.

Writes one CSV row per refinement round to stdout:
    python scripts/convergence.py --time-limit 120 5:0.25 1:0.2 0.2:0.05
"""
import argparse
import csv
import sys

from dpnoise.bounds import Schedule, converge
from dpnoise.loss import parse_loss
from dpnoise.partition import PrivacyBudget


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("budgets", nargs="+", help="EPS:DELTA pairs")
    ap.add_argument("--loss", default="l1")
    ap.add_argument("--delta-f", default="1")
    ap.add_argument("--target-gap", type=float, default=0.01)
    ap.add_argument("--time-limit", type=float, default=120.0)
    args = ap.parse_args(argv)
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["epsilon", "delta", "radius", "k", "cells", "UB", "LB", "best_gap", "seconds"])
    for item in args.budgets:
        eps, delta = map(float, item.split(":"))
        b = PrivacyBudget(eps, delta, args.delta_f)
        pair = converge(b, parse_loss(args.loss), args.target_gap,
                        Schedule(time_limit=args.time_limit))
        for h in pair.history:
            out.writerow([eps, delta, h["radius"], h["k"], h["n_cells"], f"{h['UB']:.12g}",
                          f"{h['LB']:.12g}", f"{h['best_gap']:.6g}", f"{h['seconds']:.2f}"])
        sys.stdout.flush()


if __name__ == "__main__":
    main()
