"""Noise standard deviations for the average-salary query (in INR).

Sensitivity is (190 - 120) / 194 thousand INR; ``--rounded`` uses 0.36
instead, the value the published figures were computed with.
"""
import argparse
from fractions import Fraction

from dpnoise.bounds import cutting_plane
from dpnoise.loss import parse_loss
from dpnoise.mechanisms import analytic_gaussian, gaussian, laplace, piecewise, std, truncated_laplace
from dpnoise.partition import PrivacyBudget, uniform_partition


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rounded", action="store_true")
    ap.add_argument("--k", type=int, default=32, help="cells per sensitivity for the LP")
    ap.add_argument("--loss", default="l2")
    args = ap.parse_args(argv)
    df = Fraction(36, 100) if args.rounded else Fraction(70, 194)
    b = PrivacyBudget(1, 0.2, df)
    rows = {
        "laplace": std(laplace(b)),
        "gaussian (calibration outside its range)": std(gaussian(b)),
        "analytic_gaussian": std(analytic_gaussian(b)),
        "truncated_laplace": std(truncated_laplace(b)),
    }
    res = cutting_plane("upper", uniform_partition(2 * args.k, args.k, df), b,
                        parse_loss(args.loss))
    rows[f"optimal upper bound ({args.loss}, k={args.k})"] = std(piecewise(res.distribution))
    print(f"sensitivity {float(df):.6f} k INR")
    for name, s in rows.items():
        print(f"{name:45s} {1000 * s:8.2f} INR")


if __name__ == "__main__":
    main()
