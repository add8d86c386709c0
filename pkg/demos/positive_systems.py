"""Positive-hull runs on random nonnegative pairs, m = 1, M = 2.

The polytopes stay tiny (one or two vertices) and the bisection needs a
handful of short runs even in dimension 20.

Run: python3 demos/positive_systems.py [--dims 5 10 20] [--seed 0]
"""
import argparse
import time

import numpy as np

from multinorm import EngineConfig, RestrictedSystem, bisect_sigma


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--dims", type=int, nargs="+", default=[5, 10, 20])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--upper", type=float, default=2.0)
    args = parser.parse_args()
    rng = np.random.default_rng(args.seed)
    print(f"{'dim':>4} {'len P':>8} {'iterations':>10} {'sigma interval':>26} {'time':>7}")
    for d in args.dims:
        sys = RestrictedSystem.uniform([rng.uniform(0, 5, (d, d)) for _ in range(2)], 1.0, args.upper)
        t = time.perf_counter()
        res = bisect_sigma(sys, EngineConfig(hull="pos"), target_width=0.01)
        rep = res.upper_report
        print(f"{d:>4} {str(rep.vertex_counts):>8} {rep.iterations:>10} "
              f"  [{res.lo:.5f}, {res.hi:.5f}] {time.perf_counter() - t:6.1f}s")


if __name__ == "__main__":
    main()
