"""Measure sqrt(m) * ratio of G-OBD(gamma=1, mu=1) on the ramp, drift and random families.

This sweep calibrated the constant envelope used by the acceptance suite.
"""

import math

from socolab.adversaries import gen_drift, gen_ramp, gen_random_quadratics
from socolab.algorithms import AlgoConfig, run
from socolab.harness import competitive_ratio
from socolab.offline import offline_optimal


def main():
    algo = AlgoConfig("gobd", gamma=1.0, mu=1.0)
    for m in (0.005, 0.01, 0.02, 0.05, 0.1, 9 / 64):
        insts = [gen_ramp(m, 1e6, 200), gen_drift(m, 1.0)]
        insts += [gen_random_quadratics(m, 100, seed=s) for s in range(10)]
        worst = max(competitive_ratio(run(algo, i), offline_optimal(i)) for i in insts)
        print(f"m={m:<8g} worst={worst:8.3f} sqrt(m)*worst={math.sqrt(m) * worst:.3f}")


if __name__ == "__main__":
    main()
