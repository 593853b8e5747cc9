"""Instances: fixed cost sequences and adaptive adversaries.

The lower-bound families come with an explicit comparator trajectory (the
adversary's own path), which upper-bounds the offline optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol

import numpy as np

from socolab.costs import (
    HittingCost,
    make_ellipsoidal_quadratic,
    make_piecewise_quasiconvex,
    make_quadratic,
    make_tilted_quadratic,
)
from socolab.geometry import MovementCost, as_point, make_squared_l2_potential


class AdaptiveGenerator(Protocol):
    """Per-run adversary state.

    ``cost(t, x_prev)`` emits round t's cost after seeing the learner's last
    point; ``observe(t, x_t)`` shows it the learner's answer so it can place
    its own comparator point for round t.
    """

    comparator: list

    def cost(self, t: int, x_prev: np.ndarray) -> HittingCost: ...

    def observe(self, t: int, x_t: np.ndarray) -> None: ...


@dataclass
class Instance:
    x0: np.ndarray
    movement: MovementCost
    T: int
    costs: Optional[list] = None
    generator: Optional[Callable[[], AdaptiveGenerator]] = None
    comparator: Optional[np.ndarray] = None
    name: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x0 = as_point(self.x0, self.movement.d)
        if (self.costs is None) == (self.generator is None):
            raise ValueError("an instance has either a fixed cost list or a generator")
        if self.costs is not None:
            if len(self.costs) != self.T:
                raise ValueError(f"T={self.T} but {len(self.costs)} costs given")
            for f in self.costs:
                if f.d != self.movement.d:
                    raise ValueError("cost dimension does not match the instance")
        if self.comparator is not None:
            self.comparator = np.asarray(self.comparator, dtype=float).reshape(self.T + 1, self.d)

    @property
    def d(self) -> int:
        return self.movement.d

    @property
    def adaptive(self) -> bool:
        return self.generator is not None

    @property
    def convex(self) -> bool:
        return self.costs is not None and all(f.is_convex for f in self.costs)


def l2_movement(d: int) -> MovementCost:
    return MovementCost(make_squared_l2_potential(d))


def trajectory_costs(costs, movement: MovementCost, traj) -> tuple[np.ndarray, np.ndarray]:
    """Per-round hitting and movement costs of a trajectory x_0..x_T."""
    traj = np.asarray(traj, dtype=float)
    hit = np.array([f(traj[t + 1]) for t, f in enumerate(costs)])
    move = np.array([movement(traj[t + 1], traj[t]) for t in range(len(costs))])
    return hit, move


def gen_ramp(m: float, m_steep: float, n: int) -> Instance:
    """n rounds of (m/2)x^2 followed by one round of (m_steep/2)(x - 1)^2, from x0 = 0.

    The comparator is the cheapest monotone path from 0 that lands on 1 in the
    last round; its cost is a_n / 2 from :func:`socolab.offline.quadratic_chain`.
    """
    if not (m > 0 and m_steep > 0 and n >= 1):
        raise ValueError("need m, m_steep > 0 and n >= 1")
    costs = [make_quadratic(m, [0.0]) for _ in range(n)] + [make_quadratic(m_steep, [1.0])]
    # backward pass: x_k = x_{k+1} / (a_{k-1} + m + 1), a_0 = 1
    a = [1.0]
    for _ in range(n):
        a.append((a[-1] + m) / (a[-1] + m + 1.0))
    comp = np.zeros(n + 2)
    comp[n + 1] = 1.0
    for k in range(n, 0, -1):
        comp[k] = comp[k + 1] / (a[k - 1] + m + 1.0)
    return Instance(np.zeros(1), l2_movement(1), n + 1, costs=costs, comparator=comp,
                    name="ramp", params={"m": m, "m_steep": m_steep, "n": n})


def drift_lambda(m: float, gamma: float) -> float:
    r = math.sqrt(gamma * m)
    return r / (1.0 + r)


def gen_drift(m: float, gamma: float, m_steep: float = 1e6) -> Instance:
    """Minimizers marching right, (m/2)(x - t)^2 for t = 1..n, then m_steep * x^2.

    n = ceil(1/lambda) with lambda = sqrt(gamma m)/(1 + sqrt(gamma m)); the
    comparator stays at 0 throughout.
    """
    if not gamma * m < 1:
        raise ValueError("drift construction needs gamma * m < 1")
    inv_lam = 1.0 + 1.0 / math.sqrt(gamma * m)
    n = math.ceil(inv_lam - 1e-9)
    costs = [make_quadratic(m, [float(t)]) for t in range(1, n + 1)]
    costs.append(make_quadratic(2.0 * m_steep, [0.0]))
    return Instance(np.zeros(1), l2_movement(1), n + 1, costs=costs,
                    comparator=np.zeros(n + 2), name="drift",
                    params={"m": m, "gamma": gamma, "m_steep": m_steep, "n": n,
                            "lambda": drift_lambda(m, gamma)})


def drift_closed_form(m: float, gamma: float, n: int) -> np.ndarray:
    """OBD positions x_0..x_n on the drift instance: t - ((1-lam)/lam)(1 - (1-lam)^t)."""
    lam = drift_lambda(m, gamma)
    t = np.arange(n + 1, dtype=float)
    return t - (1.0 - lam) / lam * (1.0 - (1.0 - lam) ** t)


def gen_single_step(m: float) -> Instance:
    """One round of (m/2)(1 - x)^2 from x0 = 0; the comparator stays at 0 (cost m/2)."""
    if not m > 0:
        raise ValueError("m must be positive")
    return Instance(np.zeros(1), l2_movement(1), 1, costs=[make_quadratic(m, [1.0])],
                    comparator=np.zeros(2), name="single", params={"m": m})


def gen_fixed_point(m: float, T: int) -> Instance:
    """T copies of the piecewise quasiconvex cost, starting at its fixed point -1.

    The comparator jumps to the minimizer 0 in round 1 and stays (total 1/2).
    """
    if not (m > 0 and T >= 1):
        raise ValueError("need m > 0 and T >= 1")
    f = make_piecewise_quasiconvex(m)
    comp = np.zeros(T + 1)
    comp[0] = -1.0
    return Instance(np.array([-1.0]), l2_movement(1), T, costs=[f] * T, comparator=comp,
                    name="fixedpoint", params={"m": m, "T": T})


def gen_random_quadratics(m: float, T: int, d: int = 2, seed: int = 0,
                          max_condition: float = 10.0, box: float = 1.0) -> Instance:
    """Random ellipsoidal quadratics with smallest curvature exactly m.

    Minimizers are uniform in [-box, box]^d; the largest curvature is m times a
    uniform factor in [1, max_condition].
    """
    rng = np.random.default_rng(seed)
    costs = []
    for _ in range(T):
        v = rng.uniform(-box, box, size=d)
        if d == 1:
            A = np.array([[m]])
        else:
            q, _ = np.linalg.qr(rng.normal(size=(d, d)))
            eig = m * np.concatenate([[1.0], rng.uniform(1.0, max_condition, size=d - 1)])
            A = q @ np.diag(eig) @ q.T
        costs.append(make_ellipsoidal_quadratic(A, v, m=m))
    return Instance(np.zeros(d), l2_movement(d), T, costs=costs, name="random-quadratic",
                    params={"m": m, "T": T, "d": d, "seed": seed})


def gen_drifting_quadratics(m: float, T: int, seed: int = 0, step: Optional[float] = None,
                            box: float = 1.0) -> Instance:
    """1-d quadratics whose minimizer performs a bounded random walk in [-box, box].

    Per-round drift is uniform in [-step, step]; the default step is T**-0.25.
    """
    if step is None:
        step = T ** -0.25
    rng = np.random.default_rng(seed)
    v = 0.0
    costs = []
    for _ in range(T):
        v = float(np.clip(v + rng.uniform(-step, step), -box, box))
        costs.append(make_quadratic(m, [v]))
    return Instance(np.zeros(1), l2_movement(1), T, costs=costs, name="drifting-quadratic",
                    params={"m": m, "T": T, "seed": seed, "step": step, "box": box})


def _rotate(u: np.ndarray, theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([c * u[0] - s * u[1], s * u[0] + c * u[1]])


class CircleAdversary:
    """Adaptive right-triangle construction that walks OBD around a circle.

    Round 1 pays (m/2)||x||^2 while the comparator moves to (ell, 0).  Every
    later round reads OBD's point A and the comparator point D (|AD| = ell),
    builds the right triangle ABC with |AB| = sqrt(gamma m) ell, |BC| = ell and
    D on AC, and emits (m/2)||u - C||^2 + tilt * dist(u, line BC).  Once OBD
    answers with E, the comparator takes the point F on line BC with
    |EF| = ell closest to C.
    """

    def __init__(self, m: float, gamma: float, ell: float = 1.0,
                 tilt_epsilon: Optional[float] = None, tilt_factor: float = 10.0):
        if not (m > 0 and gamma > 0 and ell > 0):
            raise ValueError("need m, gamma, ell > 0")
        self.m, self.gamma, self.ell = m, gamma, ell
        self.eps = 1e-3 * ell if tilt_epsilon is None else tilt_epsilon
        if not self.eps > 0:
            raise ValueError("tilt_epsilon must be positive")
        self.tilt_factor = tilt_factor
        self.comparator = [np.zeros(2)]
        self.frames: list = []
        self.landing_error: list = []
        self.degenerate: list = []
        self._frame = None

    @property
    def h(self) -> float:
        return math.sqrt(self.gamma * self.m) * self.ell

    @property
    def z(self) -> float:
        return math.hypot(self.h, self.ell) - self.ell

    def tilt(self) -> float:
        return self.tilt_factor * self.h * self.m * self.ell ** 2 / self.eps ** 2

    def cost(self, t: int, x_prev) -> HittingCost:
        A = np.asarray(x_prev, dtype=float)
        if t == 1:
            self._frame = None
            return make_quadratic(self.m, A)
        D = self.comparator[-1]
        gap = float(np.linalg.norm(D - A))
        if gap <= 1e-12 * self.ell:
            self.degenerate.append(t)
            raise ValueError(f"round {t}: learner coincides with the comparator")
        u = (D - A) / gap
        ell = gap
        h = math.sqrt(self.gamma * self.m) * ell
        hyp = math.hypot(h, ell)
        C = A + hyp * u
        B = A + h * _rotate(u, math.acos(h / hyp))
        e = (C - B) / float(np.linalg.norm(C - B))
        f = make_tilted_quadratic(self.m, C, B, e, self.tilt())
        self._frame = (A, B, C, e, ell)
        self.frames.append({"t": t, "A": A, "B": B, "C": C, "D": D})
        return f

    def observe(self, t: int, x_t) -> None:
        E = np.asarray(x_t, dtype=float)
        if self._frame is None:
            self.comparator.append(E + np.array([self.ell, 0.0]))
            return
        A, B, C, e, ell = self._frame
        self.landing_error.append(float(np.linalg.norm(E - B)))
        foot = C + float((E - C) @ e) * e
        off = float(np.linalg.norm(E - foot))
        if off > ell:
            self.degenerate.append(t)
            self.comparator.append(foot)
            return
        s = math.sqrt(ell * ell - off * off)
        cands = (foot + s * e, foot - s * e)
        F = min(cands, key=lambda p: float(np.linalg.norm(p - C)))
        self.comparator.append(F)


def circle_adversary(m: float, gamma: float, tilt_epsilon: Optional[float] = None,
                     ell0: float = 1.0, T: int = 500) -> Instance:
    """Adaptive instance built around :class:`CircleAdversary` (dimension 2, x0 = 0)."""
    if T < 2:
        raise ValueError("the circle construction needs at least two rounds")
    factory = lambda: CircleAdversary(m, gamma, ell0, tilt_epsilon)
    return Instance(np.zeros(2), l2_movement(2), T, generator=factory, name="circle",
                    params={"m": m, "gamma": gamma, "ell": ell0,
                            "tilt_epsilon": 1e-3 * ell0 if tilt_epsilon is None else tilt_epsilon})
