"""Evaluate the three lower-bound constructions over a few values of m."""

import argparse

from socolab.harness import lower_bound_report


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=float, nargs="+", default=[0.01, 0.05, 0.1])
    args = ap.parse_args()
    for which in ("ramp", "obd", "quasiconvex"):
        for m in args.m:
            rep = lower_bound_report(which, m)
            rep.pop("table", None)
            print(which, {k: round(v, 4) if isinstance(v, float) else v for k, v in rep.items()})


if __name__ == "__main__":
    main()
