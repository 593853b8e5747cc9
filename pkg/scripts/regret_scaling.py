"""Normalized L-constrained regret of R-OBD for T in {100, 400, 1600}, L = sqrt(T)."""

import argparse
import math

from socolab.harness import regret_report


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=float, default=1.0)
    ap.add_argument("--seeds", type=int, default=3)
    args = ap.parse_args()
    for seed in range(args.seeds):
        vals = []
        for T in (100, 400, 1600):
            rep = regret_report(T, math.sqrt(T), m=args.m, seed=seed)
            vals.append(rep["normalized"])
            print(f"seed={seed} T={T:5d} regret={rep['regret']:.4f} normalized={rep['normalized']:.5f} "
                  f"K-sensitivity={rep['budget_tuned_regret']}")
        print(f"seed={seed} max/min={max(vals) / min(vals):.3f}")


if __name__ == "__main__":
    main()
