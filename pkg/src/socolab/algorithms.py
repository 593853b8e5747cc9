"""Online Balanced Descent and its greedy / regularized variants."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from socolab.adversaries import Instance, trajectory_costs
from socolab.costs import HittingCost
from socolab.geometry import MovementCost, Potential, as_point, bregman
from socolab.solver import (
    DEFAULT_SETTINGS,
    Composite,
    SolverError,
    SolveSettings,
    minimize_strongly_convex,
    obd_balance_search,
    stationarity,
)

log = logging.getLogger(__name__)

FAMILIES = ("obd", "gobd", "robd", "stay_put", "follow_minimizer")


@dataclass(frozen=True)
class AlgoConfig:
    which: str
    gamma: float = 1.0
    mu: float = 1.0
    lambda1: float = 1.0
    lambda2: float = 0.0
    solve: SolveSettings = DEFAULT_SETTINGS

    def __post_init__(self):
        if self.which not in FAMILIES:
            raise ValueError(f"unknown algorithm {self.which!r}; choose from {FAMILIES}")
        if self.which in ("obd", "gobd") and not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.which == "gobd" and not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.which == "robd":
            if not 0 < self.lambda1 <= 1:
                raise ValueError("R-OBD needs 0 < lambda1 <= 1")
            if not self.lambda2 >= 0:
                raise ValueError("R-OBD needs lambda2 >= 0")

    def params(self) -> dict:
        if self.which == "obd":
            return {"gamma": self.gamma}
        if self.which == "gobd":
            return {"gamma": self.gamma, "mu": self.mu}
        if self.which == "robd":
            return {"lambda1": self.lambda1, "lambda2": self.lambda2}
        return {}


@dataclass
class RunResult:
    trajectory: np.ndarray
    hit: np.ndarray
    move: np.ndarray
    total: float
    costs: list = field(repr=False, default_factory=list)
    comparator: Optional[np.ndarray] = None
    comparator_hit: Optional[np.ndarray] = None
    comparator_move: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)
    completed: bool = True

    @property
    def T(self) -> int:
        return len(self.hit)

    @property
    def comparator_total(self) -> Optional[float]:
        if self.comparator_hit is None:
            return None
        return math.fsum(self.comparator_hit) + math.fsum(self.comparator_move)


def obd_step(f: HittingCost, x_prev, gamma: float, s: SolveSettings = DEFAULT_SETTINGS) -> np.ndarray:
    """One OBD round (squared-l2 movement): the balanced sublevel projection of x_prev."""
    x, _ = obd_balance_search(f, x_prev, gamma, s)
    return x


def gobd_step(f: HittingCost, x_prev, gamma: float, mu: float, m: float,
              s: SolveSettings = DEFAULT_SETTINGS) -> np.ndarray:
    """OBD step followed by a step of relative size mu*sqrt(m) toward the minimizer."""
    if m < 0:
        raise ValueError("m must be non-negative")
    w = mu * math.sqrt(m)
    if w >= 1:
        return f.minimizer.copy()
    x_obd = obd_step(f, x_prev, gamma, s)
    return w * f.minimizer + (1.0 - w) * x_obd


def robd_objective(f: HittingCost, x_prev, lambda1: float, lambda2: float,
                   potential: Potential) -> Composite:
    """f(x) + lambda1 D_h(x||x_prev) + lambda2 D_h(x||v) as a :class:`Composite`."""
    gh_prev = potential.grad_h(x_prev)
    hp = potential.h(x_prev)
    v = f.minimizer
    # the pull toward v needs v inside the potential's domain
    if lambda2 > 0:
        gh_v, hv = potential.grad_h(v), potential.h(v)
    else:
        gh_v, hv = np.zeros_like(gh_prev), 0.0
    lam = lambda1 + lambda2

    def value(x):
        hx = potential.h(x)
        out = f(x) + lambda1 * (hx - hp - float(gh_prev @ (x - x_prev)))
        if lambda2 > 0:
            out += lambda2 * (hx - hv - float(gh_v @ (x - v)))
        return out

    def grad(x):
        return f.grad(x) + lam * potential.grad_h(x) - lambda1 * gh_prev - lambda2 * gh_v

    project = potential.project if potential.domain != "all" else None
    mu = f.m + lam * potential.alpha if f.is_convex else lam * potential.alpha
    return Composite(value, grad, mu, project=project)


def robd_step(f: HittingCost, x_prev, lambda1: float, lambda2: float, movement: MovementCost,
              s: SolveSettings = DEFAULT_SETTINGS, use_prox: bool = True) -> np.ndarray:
    """argmin_x f(x) + lambda1 c(x, x_prev) + lambda2 c(x, v).

    With squared-l2 movement and a cost that has a proximal map this is a
    single prox evaluation at the weighted centre of x_prev and v; otherwise
    the composite objective is minimized by (projected) gradient descent from
    x_prev.
    """
    p = movement.potential
    x_prev = p.check(x_prev)
    lam = lambda1 + lambda2
    if use_prox and p.is_squared_l2 and f.prox is not None:
        centre = (lambda1 * x_prev + lambda2 * f.minimizer) / lam
        return f.prox(centre, 1.0 / lam)
    F = robd_objective(f, x_prev, lambda1, lambda2, p)
    return minimize_strongly_convex(F, x_prev, s)


def robd_residual(f: HittingCost, x, x_prev, lambda1: float, lambda2: float,
                  potential: Potential) -> float:
    """First-order residual ||grad f + l1 (grad h(x) - grad h(x_prev)) + l2 (grad h(x) - grad h(v))||.

    On the floored simplex the gradient-mapping norm is used instead, which
    discounts the normal cone of the domain.
    """
    F = robd_objective(f, x_prev, lambda1, lambda2, potential)
    return stationarity(F, np.asarray(x, dtype=float))


def robd_optimal_params(m: float, alpha: float = 1.0, beta: float = 1.0) -> tuple[float, float]:
    """lambda2 = 0 and lambda1 = 2 / (1 + sqrt(1 + 4 beta^2 / (alpha m)))."""
    if not (m > 0 and alpha > 0 and beta > 0):
        raise ValueError("m, alpha, beta must be positive")
    return 2.0 / (1.0 + math.sqrt(1.0 + 4.0 * beta * beta / (alpha * m))), 0.0


def robd_bound(m: float, alpha: float, beta: float, lambda1: float, lambda2: float) -> float:
    return max((m + lambda2 * beta) / (lambda1 * m),
               1.0 + (beta * beta / alpha) * lambda1 / (lambda2 * beta + m))


def optimal_ratio(m: float, alpha: float = 1.0, beta: float = 1.0) -> float:
    """1/2 (1 + sqrt(1 + 4 beta^2 / (m alpha))); for alpha = beta = 1 also the lower bound."""
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * beta * beta / (m * alpha)))


def predicted_ratio(which: str, m: float, alpha: float = 1.0, beta: float = 1.0,
                    lambda1: Optional[float] = None, lambda2: float = 0.0) -> float:
    """Closed-form competitive-ratio upper bound for a configuration.

    ``"robd"`` uses the general (lambda1, lambda2) bound, defaulting to the
    optimal lambda1; ``"lower_bound"`` is the bound no online algorithm beats
    with squared-l2 movement.
    """
    if not (m > 0 and alpha > 0 and beta > 0):
        raise ValueError("m, alpha, beta must be positive")
    if which == "robd":
        if lambda1 is None:
            lambda1, lambda2 = robd_optimal_params(m, alpha, beta)
        if not 0 < lambda1 <= 1 or lambda2 < 0:
            raise ValueError("need 0 < lambda1 <= 1 and lambda2 >= 0")
        return robd_bound(m, alpha, beta, lambda1, lambda2)
    if which == "lower_bound":
        return optimal_ratio(m)
    raise ValueError(f"no closed-form bound for {which!r}")


def regret_params(m: float, alpha: float = 1.0, beta: float = 1.0, schedule: str = "ratio_tuned",
                  T: Optional[int] = None, L: Optional[float] = None,
                  G: Optional[float] = None, D: Optional[float] = None,
                  K: float = 1.0) -> tuple[float, float]:
    """Parameters giving O(G sqrt(TL)) L-constrained regret.

    ``"ratio_tuned"``: lambda1 = max(optimal lambda1, 1 - m/(4 beta)), lambda2 = 0.
    ``"budget_tuned"``: lambda1 = max(1 - m/(4 beta), small positive), lambda2 = K G/D^2 sqrt(L/T),
    where G bounds the gradients, D is the diameter and K a free constant.
    """
    floor = 1.0 - m / (4.0 * beta)
    if schedule == "ratio_tuned":
        lam1, _ = robd_optimal_params(m, alpha, beta)
        return min(1.0, max(lam1, floor)), 0.0
    if schedule == "budget_tuned":
        if None in (T, L, G, D) or D <= 0:
            raise ValueError("the budget-tuned schedule needs T, L, G and D > 0")
        return min(1.0, max(floor, 1e-12)), K * G / D ** 2 * math.sqrt(L / T)
    raise ValueError(f"unknown schedule {schedule!r}")


def step(algo: AlgoConfig, f: HittingCost, x_prev, movement: MovementCost) -> np.ndarray:
    s = algo.solve
    if algo.which == "stay_put":
        return np.array(x_prev, dtype=float, copy=True)
    if algo.which == "follow_minimizer":
        return f.minimizer.copy()
    if algo.which in ("obd", "gobd") and not movement.potential.is_squared_l2:
        raise ValueError("OBD and G-OBD are defined for squared-l2 movement only")
    if algo.which == "obd":
        return obd_step(f, x_prev, algo.gamma, s)
    if algo.which == "gobd":
        return gobd_step(f, x_prev, algo.gamma, algo.mu, f.m, s)
    return robd_step(f, x_prev, algo.lambda1, algo.lambda2, movement, s)


def run(algo: AlgoConfig, inst: Instance) -> RunResult:
    """Play the online game: observe f_t, choose x_t, pay f_t(x_t) + c(x_t, x_{t-1}).

    A failing step stops the run; the partial result carries ``completed=False``
    and the error message in ``diagnostics``.
    """
    if algo.which == "robd" and inst.costs is not None and not inst.convex:
        log.warning("R-OBD guarantees assume strongly convex costs; running on %s anyway", inst.name)
    movement = inst.movement
    gen = inst.generator() if inst.adaptive else None
    x = inst.x0
    traj = [x]
    costs = []
    diagnostics: dict = {}
    completed = True
    for t in range(1, inst.T + 1):
        try:
            f = gen.cost(t, x) if gen is not None else inst.costs[t - 1]
            x_new = as_point(step(algo, f, x, movement), inst.d)
        except (SolverError, ValueError, FloatingPointError) as exc:
            diagnostics["error"] = f"round {t}: {exc}"
            completed = False
            log.error("run aborted in round %d: %s", t, exc)
            break
        if gen is not None:
            gen.observe(t, x_new)
        costs.append(f)
        traj.append(x_new)
        x = x_new
    traj_arr = np.array(traj)
    hit, move = trajectory_costs(costs, movement, traj_arr)
    res = RunResult(traj_arr, hit, move, math.fsum(hit) + math.fsum(move), costs,
                    diagnostics=diagnostics, completed=completed)
    comp = None
    if gen is not None:
        comp = np.array(gen.comparator[: len(traj)])
        for key in ("landing_error", "degenerate"):
            if hasattr(gen, key):
                diagnostics[key] = list(getattr(gen, key))
    elif inst.comparator is not None:
        comp = inst.comparator[: len(traj)]
    if comp is not None and len(comp) == len(traj):
        res.comparator = comp
        res.comparator_hit, res.comparator_move = trajectory_costs(costs, movement, comp)
    return res


def movement_of(potential: Potential, traj) -> np.ndarray:
    traj = np.asarray(traj, dtype=float)
    return np.array([bregman(potential, traj[t + 1], traj[t]) for t in range(len(traj) - 1)])
