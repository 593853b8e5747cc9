"""Metrics, sweeps, slope fits and result export."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from socolab.adversaries import (
    Instance,
    circle_adversary,
    gen_drift,
    gen_drifting_quadratics,
    gen_fixed_point,
    gen_ramp,
    gen_random_quadratics,
    gen_single_step,
    trajectory_costs,
)
from socolab.algorithms import (
    AlgoConfig,
    RunResult,
    optimal_ratio,
    regret_params,
    robd_optimal_params,
    run,
)
from socolab.offline import OfflineResult, l_constrained_optimal, offline_optimal
from socolab.solver import DEFAULT_SETTINGS, SolveSettings

log = logging.getLogger(__name__)

UNBOUNDED = math.inf
VS_OPT = "offline_optimal"
VS_COMPARATOR = "vs comparator"

ALGO_ALIASES = {"obd": "obd", "gobd": "gobd", "robd": "robd",
                "stay": "stay_put", "follow": "follow_minimizer"}
INSTANCES = ("ramp", "drift", "single", "fixedpoint", "circle", "random-quadratic",
             "drifting-quadratic")

# gamma = c * m^(-1/3) for each c; the grid reaches gamma*m >= 1 where the
# single-step family takes over from the drift family
GAMMA_GRID = (0.5, 1.0, 2.0, 4.0, 8.0, 16.0)


def _total(x) -> float:
    if isinstance(x, (RunResult, OfflineResult)):
        return x.total
    return float(x)


def competitive_ratio(alg: Union[RunResult, float], oracle: Union[OfflineResult, RunResult, float]) -> float:
    """alg total / oracle total; ``UNBOUNDED`` when the oracle pays nothing."""
    a, o = _total(alg), _total(oracle)
    if not o > 0:
        return UNBOUNDED
    return a / o


def ratio_vs_comparator(res: RunResult, first_round: int = 1) -> float:
    """Ratio of summed costs against the instance's comparator from ``first_round`` on."""
    if res.comparator_hit is None:
        raise ValueError("run has no comparator")
    k = first_round - 1
    alg = math.fsum(res.hit[k:]) + math.fsum(res.move[k:])
    comp = math.fsum(res.comparator_hit[k:]) + math.fsum(res.comparator_move[k:])
    return competitive_ratio(alg, comp)


def ratio_of(res: RunResult, inst: Instance, s: SolveSettings = DEFAULT_SETTINGS) -> tuple[float, str, float]:
    """(ratio, basis, oracle total): offline optimum for fixed instances, comparator otherwise."""
    if inst.adaptive:
        return competitive_ratio(res, res.comparator_total), VS_COMPARATOR, res.comparator_total
    opt = offline_optimal(inst, s)
    return competitive_ratio(res, opt), VS_OPT, opt.total


def l_regret(alg: RunResult, inst: Instance, L: float, s: SolveSettings = DEFAULT_SETTINGS) -> float:
    """cost(ALG) - cost(OPT(L)), reported as-is (can be slightly negative)."""
    if inst.adaptive:
        raise ValueError("L-constrained regret needs a fixed instance")
    opt = l_constrained_optimal(inst, L, s)
    if not opt.converged:
        raise RuntimeError(f"L-constrained oracle did not converge (residual {opt.residual:.3g})")
    return alg.total - opt.total


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    m: list
    ratio: list
    used: list

    def to_dict(self) -> dict:
        return asdict(self)


def fit_loglog_slope(ms: Sequence[float], ratios: Sequence[float]) -> SlopeFit:
    """OLS fit of log(ratio) on log(m).

    Non-finite ratios are dropped with a warning; so is the largest m when
    its ratio is below 1.05, since the bounds only bite as m shrinks.
    """
    ms, ratios = list(map(float, ms)), list(map(float, ratios))
    if len(ms) != len(ratios):
        raise ValueError("m grid and ratios differ in length")
    keep = []
    for i, (m, r) in enumerate(zip(ms, ratios)):
        if not (math.isfinite(r) and r > 0 and m > 0):
            log.warning("dropping grid point m=%g with ratio %r", m, r)
            continue
        keep.append(i)
    if keep:
        top = max(keep, key=lambda i: ms[i])
        if ratios[top] < 1.05:
            keep.remove(top)
    if len(keep) < 2:
        raise ValueError("need at least two usable grid points")
    x = np.log([ms[i] for i in keep])
    y = np.log([ratios[i] for i in keep])
    slope, intercept = np.polyfit(x, y, 1)
    return SlopeFit(float(slope), float(intercept), ms, ratios, keep)


def _map(fn, items, workers: int):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def sweep_slope(ratio_fn: Callable[[float], float], m_grid: Sequence[float], workers: int = 4) -> SlopeFit:
    if len(m_grid) < 4:
        raise ValueError("a slope sweep needs at least 4 grid points")
    return fit_loglog_slope(m_grid, _map(ratio_fn, m_grid, workers))


# ---- families used by the separation experiment ---------------------------------

def robd_worst_ratio(m: float, n: int = 200, m_steep: float = 1e6, seeds: Sequence[int] = (0, 1, 2)) -> float:
    """Largest measured ratio of optimally tuned R-OBD over the ramp and a few random streams."""
    l1, l2 = robd_optimal_params(m)
    algo = AlgoConfig("robd", lambda1=l1, lambda2=l2)
    insts = [gen_ramp(m, m_steep, n)] + [gen_random_quadratics(m, 50, seed=s) for s in seeds]
    return max(competitive_ratio(run(algo, i), offline_optimal(i)) for i in insts)


def circle_ratio(m: float, gamma: float, T: int = 40) -> float:
    """OBD cost over comparator cost on the circle construction, rounds 2..T.

    Round 1 only positions the comparator, so it is left out.
    """
    res = run(AlgoConfig("obd", gamma=gamma), circle_adversary(m, gamma, T=T))
    if not res.completed:
        raise RuntimeError(res.diagnostics.get("error", "circle run failed"))
    return ratio_vs_comparator(res, first_round=2)


def obd_family_ratios(m: float, gamma: float, circle_T: int = 40) -> dict:
    algo = AlgoConfig("obd", gamma=gamma)
    out = {"circle": circle_ratio(m, gamma, circle_T)}
    if gamma * m < 1:
        inst = gen_drift(m, gamma)
        out["drift"] = competitive_ratio(run(algo, inst), offline_optimal(inst))
    inst = gen_single_step(m)
    out["single"] = competitive_ratio(run(algo, inst), offline_optimal(inst))
    return out


def obd_best_gamma(m: float, c_grid: Sequence[float] = GAMMA_GRID, circle_T: int = 40) -> dict:
    """Minimize over gamma the worst ratio across the OBD lower-bound families."""
    rows = []
    for c in c_grid:
        g = c * m ** (-1.0 / 3.0)
        fam = obd_family_ratios(m, g, circle_T)
        rows.append({"c": c, "gamma": g, "worst": max(fam.values()), **fam})
    best = min(rows, key=lambda r: r["worst"])
    return {"m": m, "ratio": best["worst"], "gamma": best["gamma"], "c": best["c"], "table": rows}


def wait_then_jump(inst: Instance) -> RunResult:
    """Stay at x0 until the last round, then take the cheapest single step.

    The last step minimizes f_T(x) + c(x, x0); on the ramp that is the best any
    algorithm that ignores the flat rounds can do.
    """
    if inst.adaptive:
        raise ValueError("needs a fixed instance")
    f = inst.costs[-1]
    last = run(AlgoConfig("robd", lambda1=1.0, lambda2=0.0),
               Instance(inst.x0, inst.movement, 1, costs=[f]))
    traj = np.repeat(inst.x0[None, :], inst.T + 1, axis=0)
    traj[-1] = last.trajectory[-1]
    hit, move = trajectory_costs(inst.costs, inst.movement, traj)
    return RunResult(traj, hit, move, math.fsum(hit) + math.fsum(move), list(inst.costs))


def measured_G_D(inst: Instance, box: float = 1.0) -> tuple[float, float]:
    """Gradient bound and diameter of the box [-box, box]^d for a fixed instance."""
    corners = [np.full(inst.d, -box), np.full(inst.d, box)]
    G = max(float(np.linalg.norm(f.grad(c))) for f in inst.costs for c in corners)
    return G, 2.0 * box * math.sqrt(inst.d)


# ---- declarative experiments -------------------------------------------------------

class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    algo: str = "robd"
    instance: str = "ramp"
    m: float = 0.25
    gamma: float = 1.0
    mu: float = 1.0
    lambda1: Optional[float] = None
    lambda2: float = 0.0
    mprime: float = 1e6
    n: int = 200
    T: int = 100
    seed: int = 0
    m_grid: Optional[list] = None
    L: Optional[float] = None
    out: Optional[str] = None
    workers: int = 4

    def __post_init__(self):
        errors = []
        if self.algo not in ALGO_ALIASES:
            errors.append(f"algo: expected one of {sorted(ALGO_ALIASES)}, got {self.algo!r}")
        if self.instance not in INSTANCES:
            errors.append(f"instance: expected one of {list(INSTANCES)}, got {self.instance!r}")
        for name in ("m", "gamma", "mu", "mprime"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                errors.append(f"{name}: must be a positive finite number, got {v!r}")
        if self.lambda1 is not None and not 0 < self.lambda1 <= 1:
            errors.append(f"lambda1: must lie in (0, 1], got {self.lambda1!r}")
        if not self.lambda2 >= 0:
            errors.append(f"lambda2: must be non-negative, got {self.lambda2!r}")
        for name in ("n", "T"):
            if not (isinstance(getattr(self, name), int) and getattr(self, name) >= 1):
                errors.append(f"{name}: must be a positive integer")
        if self.m_grid is not None:
            grid = list(self.m_grid)
            if len(grid) < 4 or not all(isinstance(v, (int, float)) and v > 0 for v in grid):
                errors.append("m_grid: needs at least 4 positive values")
            self.m_grid = [float(v) for v in grid]
        if self.L is not None and not self.L >= 0:
            errors.append(f"L: must be non-negative, got {self.L!r}")
        if not (isinstance(self.workers, int) and self.workers >= 1):
            errors.append("workers: must be a positive integer")
        if errors:
            raise ConfigError("; ".join(errors))

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError("; ".join(f"{k}: unknown field" for k in unknown))
        return cls(**d)

    def algo_config(self, m: Optional[float] = None) -> AlgoConfig:
        m = self.m if m is None else m
        which = ALGO_ALIASES[self.algo]
        l1, l2 = self.lambda1, self.lambda2
        if which == "robd" and l1 is None:
            l1, l2 = robd_optimal_params(m)
        return AlgoConfig(which, gamma=self.gamma, mu=self.mu,
                          lambda1=1.0 if l1 is None else l1, lambda2=l2)

    def build_instance(self, m: Optional[float] = None) -> Instance:
        m = self.m if m is None else m
        if self.instance == "ramp":
            return gen_ramp(m, self.mprime, self.n)
        if self.instance == "drift":
            return gen_drift(m, self.gamma, self.mprime)
        if self.instance == "single":
            return gen_single_step(m)
        if self.instance == "fixedpoint":
            return gen_fixed_point(m, self.T)
        if self.instance == "circle":
            return circle_adversary(m, self.gamma, T=self.T)
        if self.instance == "random-quadratic":
            return gen_random_quadratics(m, self.T, seed=self.seed)
        return gen_drifting_quadratics(m, self.T, seed=self.seed)


@dataclass
class ExperimentReport:
    config: dict
    totals: dict
    ratio: Optional[float] = None
    regret: Optional[float] = None
    slope: Optional[dict] = None
    runtime_sec: float = 0.0
    rows: list = field(default_factory=list, repr=False)
    files: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        def clean(v):
            return None if isinstance(v, float) and not math.isfinite(v) else v
        return {"config": self.config, "totals": {k: clean(v) for k, v in self.totals.items()},
                "ratio": clean(self.ratio), "regret": clean(self.regret),
                "slope": self.slope, "runtime_sec": self.runtime_sec}


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def step_csv(res: RunResult, oracle_hit, oracle_move) -> str:
    """Per-step CSV text: t, x (';'-joined), hit, move and both running totals."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "x_joined_by_semicolons", "hit", "move", "cum_alg", "cum_oracle"])
    alg_parts, orc_parts = [], []
    for t in range(res.T):
        alg_parts += [res.hit[t], res.move[t]]
        if oracle_hit is not None:
            orc_parts += [oracle_hit[t], oracle_move[t]]
        cum_o = _fmt(math.fsum(orc_parts)) if oracle_hit is not None else ""
        w.writerow([t + 1, ";".join(_fmt(v) for v in res.trajectory[t + 1]),
                    _fmt(res.hit[t]), _fmt(res.move[t]), _fmt(math.fsum(alg_parts)), cum_o])
    return buf.getvalue()


def totals_from_csv(text: str) -> tuple[float, float]:
    """Recompute (alg total, oracle total) from per-step CSV text."""
    rows = list(csv.DictReader(io.StringIO(text)))
    alg = math.fsum(float(r["hit"]) + float(r["move"]) for r in rows)
    return alg, float(rows[-1]["cum_oracle"]) if rows and rows[-1]["cum_oracle"] else math.nan


def _single(cfg: ExperimentConfig, m: float, s: SolveSettings) -> dict:
    inst = cfg.build_instance(m)
    res = run(cfg.algo_config(m), inst)
    if inst.adaptive:
        oh, om = res.comparator_hit, res.comparator_move
        oracle_total, basis = res.comparator_total, VS_COMPARATOR
    else:
        opt = offline_optimal(inst, s)
        oh, om, oracle_total, basis = opt.hit[: res.T], opt.move[: res.T], opt.total, VS_OPT
    out = {"m": m, "inst": inst, "res": res, "oracle_hit": oh, "oracle_move": om,
           "alg_total": res.total, "oracle_total": oracle_total, "basis": basis,
           "ratio": competitive_ratio(res, oracle_total) if oracle_total is not None else None,
           "completed": res.completed}
    if cfg.L is not None and not inst.adaptive:
        out["regret"] = l_regret(res, inst, cfg.L, s)
    return out


def run_experiment(cfg: ExperimentConfig, s: SolveSettings = DEFAULT_SETTINGS) -> ExperimentReport:
    """Execute a single run or an m-sweep, write CSV + JSON when ``cfg.out`` is set."""
    t0 = time.perf_counter()
    cfg_dict = asdict(cfg)
    if cfg.m_grid is None:
        r = _single(cfg, cfg.m, s)
        report = ExperimentReport(cfg_dict, {"alg": r["alg_total"], "oracle": r["oracle_total"],
                                             "oracle_basis": r["basis"], "completed": r["completed"]},
                                  ratio=r["ratio"], regret=r.get("regret"))
        csv_text = step_csv(r["res"], r["oracle_hit"], r["oracle_move"])
        name = "steps.csv"
    else:
        results = _map(lambda m: _single(cfg, m, s), cfg.m_grid, cfg.workers)
        ratios = [r["ratio"] for r in results]
        fit = fit_loglog_slope(cfg.m_grid, ratios)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "alg_total", "oracle_total", "ratio", "basis"])
        for r in results:
            w.writerow([_fmt(r["m"]), _fmt(r["alg_total"]), _fmt(r["oracle_total"]),
                        _fmt(r["ratio"]), r["basis"]])
        csv_text, name = buf.getvalue(), "sweep.csv"
        report = ExperimentReport(cfg_dict, {"alg": [r["alg_total"] for r in results],
                                             "oracle": [r["oracle_total"] for r in results],
                                             "oracle_basis": results[0]["basis"]},
                                  ratio=max(ratios), slope=fit.to_dict())
        report.rows = [{k: r[k] for k in ("m", "alg_total", "oracle_total", "ratio")} for r in results]
    report.runtime_sec = time.perf_counter() - t0
    report.files = {"csv_text": csv_text}
    if cfg.out is not None:
        report.files.update(write_outputs(report, Path(cfg.out), name, csv_text))
    return report


def write_outputs(report: ExperimentReport, out: Path, csv_name: str, csv_text: str) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = out / csv_name, out / "report.json"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text)
    with open(json_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"csv": str(csv_path), "json": str(json_path)}


# ---- canned experiments used by the CLI and scripts ----------------------------------

def lower_bound_report(which: str, m: float) -> dict:
    """Numbers behind the three lower-bound constructions at a given m."""
    if which == "ramp":
        inst = gen_ramp(m, 1e6, 400)
        res = wait_then_jump(inst)
        return {"which": which, "m": m, "ratio": competitive_ratio(res, offline_optimal(inst)),
                "bound": optimal_ratio(m)}
    if which == "obd":
        return {"which": which, **obd_best_gamma(m)}
    if which == "quasiconvex":
        fp = gen_fixed_point(m, 200)
        stuck = run(AlgoConfig("robd", lambda1=min(1.0, max(0.5, 2 * m)), lambda2=0.0), fp)
        single = gen_single_step(m)
        lam = min(m, 1.0)
        low = run(AlgoConfig("robd", lambda1=lam, lambda2=0.0), single)
        return {"which": which, "m": m,
                "fixed_point_ratio": ratio_vs_comparator(stuck),
                "fixed_point_max_move": float(np.max(np.abs(stuck.trajectory + 1.0))),
                "single_step_ratio": competitive_ratio(low, offline_optimal(single)),
                "bound": 1.0 / (4.0 * m)}
    raise ValueError(f"unknown lower bound {which!r}")


def regret_report(T: int, L: float, m: float = 1.0, seed: int = 0,
                  K_grid: Sequence[float] = (0.1, 1.0, 10.0)) -> dict:
    """L-constrained regret of R-OBD on a drifting quadratic stream.

    The main number uses the ratio-tuned schedule; the budget-tuned schedule
    is reported for each K in ``K_grid`` as a sensitivity check.
    """
    inst = gen_drifting_quadratics(m, T, seed=seed)
    opt = l_constrained_optimal(inst, L)
    l1, l2 = regret_params(m)
    res = run(AlgoConfig("robd", lambda1=l1, lambda2=l2), inst)
    G, D = measured_G_D(inst)
    sens = {}
    for K in K_grid:
        k1, k2 = regret_params(m, schedule="budget_tuned", T=T, L=L, G=G, D=D, K=K)
        sens[str(K)] = run(AlgoConfig("robd", lambda1=k1, lambda2=k2), inst).total - opt.total
    reg = res.total - opt.total
    return {"T": T, "L": L, "m": m, "seed": seed, "lambda1": l1, "lambda2": l2,
            "regret": reg, "normalized": reg / math.sqrt(T * L) if T * L > 0 else math.nan,
            "G": G, "D": D, "budget_tuned_regret": sens}
