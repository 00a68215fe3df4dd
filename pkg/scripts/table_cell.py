"""Suboptimality of the best baseline for one (epsilon, delta) cell.

    python scripts/table_cell.py --eps 1 --delta 0.2
"""
import argparse

from dpnoise.bounds import solve_pair
from dpnoise.loss import parse_loss
from dpnoise.mechanisms import baselines, expected_loss, near_optimal_lb, suboptimality_gap
from dpnoise.partition import PrivacyBudget, uniform_partition


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", type=float, default=1.0)
    ap.add_argument("--delta", type=float, default=0.2)
    ap.add_argument("--loss", default="l1", choices=["l1", "l2"])
    ap.add_argument("--k", type=int, default=16)
    ap.add_argument("--radius", type=int, default=2, help="support half-width in sensitivities")
    args = ap.parse_args(argv)
    b = PrivacyBudget(args.eps, args.delta)
    loss = parse_loss(args.loss)
    losses = {name: expected_loss(m, loss) for name, m in baselines(b).items()}
    best = min(losses, key=losses.get)
    b_lb = near_optimal_lb(b, args.loss)
    L = args.radius * args.k
    pair = solve_pair(L, args.k, b, loss, partition=uniform_partition(L, args.k),
                      lower_partition=uniform_partition(2 * L, args.k))
    for name, v in sorted(losses.items(), key=lambda kv: kv[1]):
        print(f"{name:20s} {v:.6f}")
    print(f"{'near_optimal_lb':20s} {b_lb:.6f}")
    print(f"optimal bounds       UB={pair.UB:.6f} LB={pair.LB:.6f}")
    print(f"gap ({best} vs near_optimal_lb): "
          f"{suboptimality_gap(losses[best], b_lb, pair.UB, pair.LB):.2f}%")


if __name__ == "__main__":
    main()
