"""Command-line entry point: ``socolab {run,sweep,lowerbound,regret}``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from socolab.harness import (
    ALGO_ALIASES,
    INSTANCES,
    ConfigError,
    ExperimentConfig,
    lower_bound_report,
    regret_report,
    run_experiment,
)

_RUN_FLAGS = {"algo": str, "instance": str, "m": float, "gamma": float, "mu": float,
              "lambda1": float, "lambda2": float, "mprime": float, "n": int, "T": int,
              "seed": int, "L": float, "workers": int}


# external names of the three lower-bound constructions
_LOWER_BOUNDS = {"theorem1": "ramp", "theorem2": "obd", "theorem5": "quasiconvex"}


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    # defaults are None so that only flags actually given override the config file
    p.add_argument("--config", type=Path, help="JSON file mirroring the flags")
    p.add_argument("--algo", choices=sorted(ALGO_ALIASES))
    p.add_argument("--instance", choices=INSTANCES)
    for name, typ in _RUN_FLAGS.items():
        if name not in ("algo", "instance"):
            p.add_argument(f"--{name}", type=typ)
    p.add_argument("--out", type=str)


def _config(args: argparse.Namespace, extra: dict | None = None) -> ExperimentConfig:
    data = {}
    if args.config is not None:
        data = json.loads(args.config.read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    for name in list(_RUN_FLAGS) + ["out"]:
        v = getattr(args, name, None)
        if v is not None:
            data[name] = v
    data.update(extra or {})
    return ExperimentConfig.from_dict(data)


def _emit(obj: dict, out: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, default=lambda v: None)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n", encoding="utf-8")
    print(text)


def _finite(d: dict) -> dict:
    return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in d.items()}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="socolab", description=__doc__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    _add_run_flags(sub.add_parser("run", help="one algorithm on one instance"))
    sw = sub.add_parser("sweep", help="ratio over an m grid with a log-log slope fit")
    _add_run_flags(sw)
    sw.add_argument("--m-grid", required=True, help="comma separated m values")

    lb = sub.add_parser("lowerbound", help="evaluate a lower-bound construction")
    lb.add_argument("--which", required=True, choices=sorted(_LOWER_BOUNDS))
    lb.add_argument("--m", type=float, required=True)
    lb.add_argument("--out", type=str)

    rg = sub.add_parser("regret", help="L-constrained regret of tuned R-OBD")
    rg.add_argument("--T", type=int, required=True)
    rg.add_argument("--L", type=float, required=True)
    rg.add_argument("--m", type=float, default=1.0)
    rg.add_argument("--seed", type=int, default=0)
    rg.add_argument("--out", type=str)

    args = parser.parse_args(argv)
    try:
        if args.cmd in ("run", "sweep"):
            extra = None
            if args.cmd == "sweep":
                extra = {"m_grid": [float(v) for v in args.m_grid.split(",") if v.strip()]}
            report = run_experiment(_config(args, extra))
            print(json.dumps(report.to_json(), indent=2, sort_keys=True))
        elif args.cmd == "lowerbound":
            rep = lower_bound_report(_LOWER_BOUNDS[args.which], args.m)
            rep.pop("table", None) if args.out is None else None
            _emit(_finite(rep), args.out)
        else:
            _emit(_finite(regret_report(args.T, args.L, m=args.m, seed=args.seed)), args.out)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
