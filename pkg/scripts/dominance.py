"""Expected l1 loss of optimised noise against truncated Laplace at sensitivity 2.

Independent noise in the low and medium privacy regimes, output-dependent
noise on an output range of length 4 in the high privacy regime.
"""
import argparse

from dpnoise.bounds import cutting_plane, cutting_plane_dependent, default_radius
from dpnoise.loss import l1
from dpnoise.mechanisms import expected_loss, truncated_laplace
from dpnoise.partition import PrivacyBudget, uniform_partition


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k", type=int, default=8)
    ap.add_argument("--dep-k", type=int, default=4)
    args = ap.parse_args(argv)
    print("epsilon,delta,mode,optimal_ub,truncated_laplace")
    for eps, delta in [(5.0, 0.25), (1.0, 0.2), (0.2, 0.05)]:
        b = PrivacyBudget(eps, delta, 2)
        R = default_radius(b)
        tl = expected_loss(truncated_laplace(b), l1())
        ub = cutting_plane("upper", uniform_partition(R * args.k, args.k, 2), b, l1()).objective
        print(f"{eps},{delta},independent,{ub:.6f},{tl:.6f}")
        if eps < 1:
            dep = cutting_plane_dependent("upper", uniform_partition(R * args.dep_k, args.dep_k, 2),
                                          0, 4, b, l1())
            print(f"{eps},{delta},dependent,{dep.objective:.6f},{tl:.6f}")


if __name__ == "__main__":
    main()
