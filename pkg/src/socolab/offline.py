"""Offline optimal trajectories and independent oracles."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize
import scipy.sparse
import scipy.sparse.linalg

from socolab.adversaries import Instance, trajectory_costs
from socolab.solver import DEFAULT_SETTINGS, SolveSettings

log = logging.getLogger(__name__)


@dataclass
class OfflineResult:
    trajectory: np.ndarray
    total: float
    movement_total: float
    converged: bool
    residual: float
    hit: np.ndarray = None
    move: np.ndarray = None
    multiplier: float = 1.0
    on_boundary: bool = False


def _result(inst: Instance, traj, converged, residual, **kw) -> OfflineResult:
    hit, move = trajectory_costs(inst.costs, inst.movement, traj)
    return OfflineResult(np.asarray(traj), math.fsum(hit) + math.fsum(move), math.fsum(move),
                         converged, residual, hit, move, **kw)


def _require_fixed(inst: Instance):
    if inst.costs is None:
        raise ValueError("offline oracles need a fixed (non-adaptive) instance")
    if not inst.movement.potential.is_squared_l2:
        raise ValueError("offline oracles support squared-l2 movement only")


def _chain_value_grad(inst: Instance, X: np.ndarray, weight: float):
    # sum_t f_t(x_t) + weight * sum_t 1/2 ||x_t - x_{t-1}||^2 and its gradient
    prev = np.vstack([inst.x0[None, :], X[:-1]])
    step = X - prev
    val = math.fsum(f(X[t]) for t, f in enumerate(inst.costs)) + weight * 0.5 * float(np.sum(step * step))
    G = np.array([f.grad(X[t]) for t, f in enumerate(inst.costs)], dtype=float).reshape(X.shape)
    G += weight * step
    G[:-1] -= weight * step[1:]
    return val, G


def _chain_hessian(inst: Instance, X: np.ndarray, weight: float):
    T, d = X.shape
    blocks_diag = []
    for t, f in enumerate(inst.costs):
        H = np.array(f.hess(X[t]), dtype=float).reshape(d, d)
        H = H + weight * (2.0 if t < T - 1 else 1.0) * np.eye(d)
        blocks_diag.append(H)
    main = scipy.sparse.block_diag(blocks_diag, format="csr")
    if T == 1:
        return main
    off = scipy.sparse.kron(scipy.sparse.diags([np.ones(T - 1), np.ones(T - 1)], [-1, 1]),
                            np.eye(d) * -weight, format="csr")
    return (main + off).tocsc()


def _solve_chain(inst: Instance, weight: float, s: SolveSettings, X0=None):
    _require_fixed(inst)
    T, d = inst.T, inst.d
    X = np.array([f.minimizer for f in inst.costs], dtype=float) if X0 is None else np.array(X0, dtype=float)
    tol = s.grad_tol * math.sqrt(T)
    newton_ok = all(f.hess is not None for f in inst.costs)
    if newton_ok:
        val, G = _chain_value_grad(inst, X, weight)
        for _ in range(100):
            res = float(np.linalg.norm(G))
            if res <= tol:
                return X, True, res
            H = _chain_hessian(inst, X, weight)
            dx = scipy.sparse.linalg.spsolve(H, -G.ravel()).reshape(T, d)
            t_step = 1.0
            while True:
                Xn = X + t_step * dx
                vn, Gn = _chain_value_grad(inst, Xn, weight)
                if vn <= val + 1e-4 * t_step * float(G.ravel() @ dx.ravel()) + 1e-12 * abs(val) or t_step < 1e-10:
                    break
                t_step *= 0.5
            if t_step < 1e-10 and float(np.linalg.norm(Gn)) >= res:
                break
            X, val, G = Xn, vn, Gn
        res = float(np.linalg.norm(G))
        return X, res <= tol, res
    # generic smooth fallback
    def fun(z):
        v, g = _chain_value_grad(inst, z.reshape(T, d), weight)
        return v, g.ravel()

    out = scipy.optimize.minimize(fun, X.ravel(), jac=True, method="L-BFGS-B",
                                  options={"maxiter": s.max_iters, "gtol": s.grad_tol, "ftol": 0.0})
    X = out.x.reshape(T, d)
    res = float(np.linalg.norm(fun(out.x)[1]))
    return X, res <= tol, res


def offline_optimal(inst: Instance, s: SolveSettings = DEFAULT_SETTINGS) -> OfflineResult:
    """Minimize the total cost jointly over x_1..x_T.

    Squared-l2 movement with costs that expose a Hessian is solved by Newton's
    method on the block-tridiagonal system (exact in one step for quadratics);
    anything else falls back to L-BFGS on the stacked gradient.  Warm start:
    the follow-the-minimizer trajectory.
    """
    X, ok, res = _solve_chain(inst, 1.0, s)
    if not ok:
        log.warning("offline solve stopped with residual %.3g", res)
    return _result(inst, np.vstack([inst.x0[None, :], X]), ok, res)


def quadratic_chain(m: float, n: int) -> tuple[np.ndarray, float]:
    """a_0..a_n from a_{k+1} = (a_k + m)/(a_k + m + 1), a_0 = 1, and the limit.

    a_n is twice the cheapest cost of a path that starts at 0, pays (m/2)x^2
    for n rounds and lands on 1 in round n+1.
    """
    if not m > 0:
        raise ValueError("m must be positive")
    a = np.empty(n + 1)
    a[0] = 1.0
    for k in range(n):
        a[k + 1] = (a[k] + m) / (a[k] + m + 1.0)
    return a, (-m + math.sqrt(m * m + 4.0 * m)) / 2.0


def l_constrained_optimal(inst: Instance, L: float, s: SolveSettings = DEFAULT_SETTINGS,
                          rel_tol: float = 1e-6) -> OfflineResult:
    """Cheapest trajectory whose total movement cost is at most L.

    Bisects on a multiplier nu >= 0 applied to the movement term; each inner
    problem is an unconstrained chain with movement weight 1 + nu.
    """
    _require_fixed(inst)
    if L < 0:
        raise ValueError("L must be non-negative")
    stay = np.repeat(inst.x0[None, :], inst.T + 1, axis=0)
    if L == 0:
        return _result(inst, stay, True, 0.0, multiplier=math.inf)
    X, ok, res = _solve_chain(inst, 1.0, s)
    free = _result(inst, np.vstack([inst.x0[None, :], X]), ok, res)
    if free.movement_total <= L * (1 + rel_tol):
        return free
    lo, hi = 1.0, 2.0
    Xh, okh, resh = _solve_chain(inst, hi, s, X)
    cand = _result(inst, np.vstack([inst.x0[None, :], Xh]), okh, resh, multiplier=hi)
    while cand.movement_total > L * (1 + rel_tol):
        lo, hi = hi, hi * 4.0
        if hi > 1e14:
            break
        Xh, okh, resh = _solve_chain(inst, hi, s, Xh)
        cand = _result(inst, np.vstack([inst.x0[None, :], Xh]), okh, resh, multiplier=hi)
    best = cand
    for _ in range(200):
        if best.movement_total >= L * (1 - rel_tol) and best.movement_total <= L * (1 + rel_tol):
            break
        mid = math.sqrt(lo * hi) if hi > 4 * lo else 0.5 * (lo + hi)
        Xm, okm, resm = _solve_chain(inst, mid, s, best.trajectory[1:])
        r = _result(inst, np.vstack([inst.x0[None, :], Xm]), okm, resm, multiplier=mid)
        if r.movement_total > L * (1 + rel_tol):
            lo = mid
        else:
            hi, best = mid, r
        if hi - lo <= 1e-14 * hi:
            break
    if best.movement_total > L * (1 + rel_tol):
        # budget too small for the multiplier range: the stay-put path is feasible
        best = _result(inst, stay, True, 0.0, multiplier=math.inf)
    return best


def grid_oracle_1d(inst: Instance, lo: float, hi: float, points_per_axis: int = 400) -> OfflineResult:
    """Exact minimum over trajectories restricted to a uniform grid, by dynamic programming.

    ``on_boundary`` flags an optimum touching the grid edge, meaning the
    bounds probably cut off the continuous optimum.
    """
    _require_fixed(inst)
    if inst.d != 1:
        raise ValueError("grid oracle is one-dimensional")
    if inst.T > 8 or points_per_axis > 400:
        raise ValueError("grid oracle limited to T <= 8 and 400 points per axis")
    if not hi > lo:
        raise ValueError("need hi > lo")
    grid = np.linspace(lo, hi, points_per_axis)
    M = 0.5 * (grid[:, None] - grid[None, :]) ** 2
    x0 = inst.x0[0]
    hit0 = np.array([inst.costs[0](np.array([g])) for g in grid])
    V = hit0 + np.array([inst.movement(np.array([g]), inst.x0) for g in grid])
    back = []
    for f in inst.costs[1:]:
        hit = np.array([f(np.array([g])) for g in grid])
        tot = V[None, :] + M  # rows: new point, cols: previous point
        arg = np.argmin(tot, axis=1)
        back.append(arg)
        V = tot[np.arange(grid.size), arg] + hit
    idx = [int(np.argmin(V))]
    for arg in reversed(back):
        idx.append(int(arg[idx[-1]]))
    idx.reverse()
    traj = np.concatenate([[x0], grid[idx]])[:, None]
    boundary = any(i in (0, grid.size - 1) for i in idx)
    return _result(inst, traj, True, 0.0, on_boundary=boundary)
