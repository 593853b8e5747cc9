"""Log-log slopes of tuned R-OBD and best-gamma OBD over a grid of m."""

import argparse
import json

from socolab.harness import fit_loglog_slope, obd_best_gamma, robd_worst_ratio

GRID = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    robd = [robd_worst_ratio(m) for m in GRID]
    obd = [obd_best_gamma(m) for m in GRID]
    for m, r, o in zip(GRID, robd, obd):
        print(f"m={m:<7g} robd={r:9.3f}  obd={o['ratio']:9.3f} (gamma={o['gamma']:.3g})")
    out = {"m": GRID, "robd": robd, "obd": [o["ratio"] for o in obd],
           "robd_slope": fit_loglog_slope(GRID, robd).slope,
           "obd_slope": fit_loglog_slope(GRID, [o["ratio"] for o in obd]).slope,
           "obd_tables": obd}
    print(f"slopes: robd {out['robd_slope']:.3f}  obd {out['obd_slope']:.3f}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(out, fh, indent=2)


if __name__ == "__main__":
    main()
