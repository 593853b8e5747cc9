"""Inner solvers: strongly convex minimization, sublevel projection, balance search."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from socolab.costs import HittingCost
from socolab.geometry import as_point


@dataclass(frozen=True)
class SolveSettings:
    grad_tol: float = 1e-9
    max_iters: int = 100_000
    bisect_tol: float = 1e-10
    shrink: float = 0.5

    def __post_init__(self):
        if not (self.grad_tol > 0 and self.max_iters > 0 and self.bisect_tol > 0):
            raise ValueError("tolerances and max_iters must be positive")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")


DEFAULT_SETTINGS = SolveSettings()


class SolverError(RuntimeError):
    """Raised when an inner solve fails; carries the best iterate and its residual."""

    def __init__(self, message: str, x: Optional[np.ndarray] = None, residual: float = math.nan):
        super().__init__(message)
        self.x = x
        self.residual = residual


@dataclass
class Composite:
    """F(x) = smooth(x) + r(x) where r is handled through ``prox_r(x, step)``.

    ``mu`` is a strong-convexity modulus of F.  ``project`` (optional) is the
    Euclidean projection onto a convex domain; it is applied after each prox.
    """

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    mu: float
    prox_r: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    r_value: Optional[Callable[[np.ndarray], float]] = None
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def total(self, x) -> float:
        v = self.value(x)
        if self.r_value is not None:
            v += self.r_value(x)
        return v

    def forward_backward(self, x, g, step):
        y = x - step * g
        if self.prox_r is not None:
            y = self.prox_r(y, step)
        if self.project is not None:
            y = self.project(y)
        return y

    @property
    def plain(self) -> bool:
        return self.prox_r is None and self.project is None


def stationarity(F: Composite, x, step: float = 1e-3) -> float:
    """Gradient-mapping norm; equals ||grad F(x)|| when F is smooth and unconstrained."""
    g = F.grad(x)
    if F.plain:
        return float(np.linalg.norm(g))
    return float(np.linalg.norm(x - F.forward_backward(x, g, step))) / step


def _accept(F: Composite, x, y, g, fx: float, fy: float, step: float) -> bool:
    # Step acceptance: a local Lipschitz estimate on the gradients, plus a guard
    # that the value did not rise beyond roundoff.  Armijo-type value tests stall
    # near the optimum, where value differences drown in roundoff.
    if not math.isfinite(fy) or fy > fx + 1e-12 * max(1.0, abs(fx)):
        return False
    return step * float(np.linalg.norm(F.grad(y) - g)) <= float(np.linalg.norm(y - x))


def minimize_strongly_convex(F: Composite, x_init, s: SolveSettings = DEFAULT_SETTINGS) -> np.ndarray:
    """Minimize F by (proximal) gradient descent with backtracking.

    Stops when the gradient mapping has norm <= grad_tol, which bounds the
    suboptimality by grad_tol**2 / (2 mu).
    """
    if not F.mu > 0:
        raise ValueError("minimize_strongly_convex needs mu > 0")
    x = as_point(x_init)
    if F.project is not None:
        x = F.project(x)
    fx = F.value(x)
    if not math.isfinite(fx):
        raise SolverError("objective not finite at the initial point", x)
    step = 1.0 / max(F.mu, 1e-12)
    best_x, best_res = x, math.inf
    for _ in range(s.max_iters):
        g = F.grad(x)
        if not np.all(np.isfinite(g)):
            raise SolverError("non-finite gradient", best_x, best_res)
        if F.plain:
            res = float(np.linalg.norm(g))
            if res < best_res:
                best_x, best_res = x, res
            if res <= s.grad_tol:
                return x
            while True:
                y = x - step * g
                fy = F.value(y)
                if _accept(F, x, y, g, fx, fy, step):
                    break
                step *= s.shrink
                if step < 1e-300:
                    raise SolverError("line search failed", best_x, best_res)
        else:
            while True:
                y = F.forward_backward(x, g, step)
                fy = F.value(y)
                dx = y - x
                if _accept(F, x, y, g, fx, fy, step):
                    break
                step *= s.shrink
                if step < 1e-300:
                    raise SolverError("line search failed", best_x, best_res)
            res = float(np.linalg.norm(dx)) / step
            if res < best_res:
                best_x, best_res = x, res
            # confirm with the fixed-step measure used by ``stationarity``
            if res <= s.grad_tol and stationarity(F, y) <= s.grad_tol:
                return y
        x, fx = y, fy
        step /= s.shrink
    raise SolverError(f"max_iters={s.max_iters} exceeded (residual {best_res:.3g})", best_x, best_res)


def prox_point(f: HittingCost, x0, w: float, s: SolveSettings = DEFAULT_SETTINGS) -> np.ndarray:
    """argmin_y w*f(y) + 1/2||y - x0||^2, closed form when the cost provides it."""
    x0 = np.asarray(x0, dtype=float)
    if w == 0:
        return x0.copy()
    if f.prox is not None:
        return f.prox(x0, w)
    F = Composite(
        value=lambda y: w * f(y) + 0.5 * float((y - x0) @ (y - x0)),
        grad=lambda y: w * f.grad(y) + (y - x0),
        mu=1.0 + w * f.m,
    )
    return minimize_strongly_convex(F, x0, s)


def _segment_level_point(f: HittingCost, level: float, x0: np.ndarray, s: SolveSettings) -> np.ndarray:
    # along x0 -> v a unimodal 1-d cost is nonincreasing; bisect for f = level
    v = f.minimizer
    lo, hi = 0.0, 1.0
    tol = s.bisect_tol * max(1.0, level)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = f(x0 + mid * (v - x0))
        if abs(val - level) <= tol and val <= level:
            return x0 + mid * (v - x0)
        if val > level:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-17:
            break
    return x0 + hi * (v - x0)


def project_sublevel(f: HittingCost, level: float, x0, s: SolveSettings = DEFAULT_SETTINGS) -> np.ndarray:
    """Euclidean projection of x0 onto {y : f(y) <= level}.

    In one dimension the projection is found by bisection along the segment to
    the minimizer (exact for any unimodal cost).  In higher dimensions the
    projection lies on the proximal path x(w) = prox_{w f}(x0); we bisect on
    the weight w until f(x(w)) = level.
    """
    x0 = as_point(x0, f.d)
    if level < f.min_value - 1e-12 * max(1.0, abs(f.min_value)):
        raise ValueError(f"level {level} below the minimum value {f.min_value}")
    if f(x0) <= level:
        return x0
    if level <= f.min_value:
        return f.minimizer.copy()
    if f.d == 1:
        return _segment_level_point(f, level, x0, s)
    if not f.is_convex:
        raise ValueError("sublevel projection in d >= 2 needs a convex cost")
    tol = s.bisect_tol * max(1.0, level)
    lo, hi = 0.0, 1.0
    x_hi = prox_point(f, x0, hi, s)
    while f(x_hi) > level:
        lo = hi
        hi *= 2.0
        if hi > 1e300:
            raise SolverError("could not bracket the proximal weight", x_hi)
        x_hi = prox_point(f, x0, hi, s)
    for _ in range(400):
        mid = 0.5 * (lo + hi) if lo == 0.0 or hi < 4 * lo else math.sqrt(lo * hi)
        x_mid = prox_point(f, x0, mid, s)
        val = f(x_mid)
        # only feasible points are returned, which makes the projection idempotent
        if level - tol <= val <= level:
            return x_mid
        if val > level:
            lo = mid
        else:
            hi, x_hi = mid, x_mid
        if hi - lo <= 1e-15 * hi:
            break
    return x_hi


def balance_residual(f: HittingCost, x, x_prev, gamma: float) -> float:
    d = np.asarray(x) - np.asarray(x_prev)
    return 0.5 * float(d @ d) - gamma * (f(x) - f.min_value)


def obd_balance_search(f: HittingCost, x_prev, gamma: float,
                       s: SolveSettings = DEFAULT_SETTINGS) -> tuple[np.ndarray, float]:
    """Find the level l whose projection x(l) balances movement and hitting cost.

    Returns (x(l), l) with 1/2||x(l) - x_prev||^2 = gamma (l - f(v)) to within
    bisect_tol * (1 + gamma).

    For convex costs the projections of x_prev onto the sublevel sets sweep out
    the proximal path, so the search bisects directly on the proximal weight
    (one bisection instead of two nested ones).  Quasiconvex costs are handled
    by bisection on the level itself.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    x_prev = as_point(x_prev, f.d)
    fmin = f.min_value
    top = f(x_prev)
    if top - fmin <= 0.0 or np.array_equal(x_prev, f.minimizer):
        return x_prev, fmin
    tol = s.bisect_tol * (1.0 + gamma)
    if f.is_convex and (f.d > 1 or f.prox is not None):
        return _balance_on_weight(f, x_prev, gamma, tol, s)
    return _balance_on_level(f, x_prev, gamma, tol, s)


def _balance_on_weight(f, x_prev, gamma, tol, s):
    # r(w) = movement - gamma * excess hit; increasing in w, r(0) < 0
    def r(w):
        x = prox_point(f, x_prev, w, s)
        return balance_residual(f, x, x_prev, gamma), x

    lo, hi = 0.0, 1.0 / max(f.m, 1e-300)
    r_hi, x_hi = r(hi)
    while r_hi < 0:
        lo = hi
        hi *= 4.0
        if hi > 1e300:
            raise SolverError("could not bracket the balance weight", x_hi, r_hi)
        r_hi, x_hi = r(hi)
    if abs(r_hi) <= tol:
        return x_hi, f(x_hi)
    best_x, best_r = x_hi, r_hi
    for _ in range(400):
        mid = 0.5 * (lo + hi) if lo == 0.0 or hi < 4 * lo else math.sqrt(lo * hi)
        r_mid, x_mid = r(mid)
        if abs(r_mid) < abs(best_r):
            best_x, best_r = x_mid, r_mid
        if abs(r_mid) <= tol:
            break
        if r_mid < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * hi:
            break
    return best_x, f(best_x)


def _balance_on_level(f, x_prev, gamma, tol, s):
    # r(l) = movement(l) - gamma (l - fmin); decreasing in l on [fmin, f(x_prev)]
    fmin = f.min_value
    lo, hi = fmin, f(x_prev)
    best_x, best_l, best_r = x_prev, hi, -gamma * (hi - fmin)
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        x = project_sublevel(f, mid, x_prev, s)
        r = 0.5 * float((x - x_prev) @ (x - x_prev)) - gamma * (mid - fmin)
        if abs(r) < abs(best_r):
            best_x, best_l, best_r = x, mid, r
        if abs(r) <= tol:
            break
        if r > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-17 * max(1.0, hi):
            break
    return best_x, best_l
