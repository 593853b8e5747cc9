"""Hitting costs used by the algorithms and the lower-bound constructions.

A :class:`HittingCost` bundles evaluation, a (sub)gradient, the minimizer and
the curvature constant ``m``.  Costs that have a cheap proximal map expose it
as ``prox(x, w) = argmin_y w*f(y) + 1/2 ||y - x||^2``; costs with a Hessian
expose ``hess(x)``.  Solvers use these when present.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from socolab.geometry import as_point

STRONGLY_CONVEX = "strongly_convex"
QUASICONVEX_GROWTH = "quasiconvex_growth"


@dataclass(frozen=True)
class HittingCost:
    fn: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    minimizer: np.ndarray
    min_value: float
    m: float
    kind: str = STRONGLY_CONVEX
    prox: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    hess: Optional[Callable[[np.ndarray], np.ndarray]] = None
    label: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __call__(self, x) -> float:
        return self.fn(np.asarray(x, dtype=float))

    @property
    def d(self) -> int:
        return self.minimizer.size

    @property
    def is_convex(self) -> bool:
        return self.kind == STRONGLY_CONVEX


def make_quadratic(m: float, v, offset: float = 0.0) -> HittingCost:
    """f(x) = (m/2)||x - v||^2 + offset."""
    if not m > 0:
        raise ValueError(f"m must be positive, got {m}")
    if offset < 0:
        raise ValueError("offset must be non-negative")
    v = as_point(v)
    d = v.size

    def fn(x):
        r = x - v
        return 0.5 * m * float(r @ r) + offset

    def grad(x):
        return m * (np.asarray(x, dtype=float) - v)

    def prox(x, w):
        return (np.asarray(x, dtype=float) + w * m * v) / (1.0 + w * m)

    eye = m * np.eye(d)
    return HittingCost(fn, grad, v, float(offset), float(m), STRONGLY_CONVEX,
                       prox=prox, hess=lambda x: eye, label="quadratic",
                       meta={"center": v, "A": eye})


def make_ellipsoidal_quadratic(A, v, offset: float = 0.0, m: Optional[float] = None) -> HittingCost:
    """f(x) = 1/2 (x - v)^T A (x - v) + offset with A symmetric positive definite.

    The curvature constant is the smallest eigenvalue of A.  A caller that
    built A from a known spectrum may pass it as ``m``; it is checked against
    the computed eigenvalue to 1e-9 relative.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    A = 0.5 * (A + A.T)
    v = as_point(v, A.shape[0])
    lam_min = float(np.linalg.eigvalsh(A)[0])
    if not lam_min > 0:
        raise ValueError("A must be positive definite")
    if m is None:
        m = lam_min
    elif abs(m - lam_min) > 1e-9 * abs(lam_min):
        raise ValueError(f"declared m={m} differs from the smallest eigenvalue {lam_min}")
    if offset < 0:
        raise ValueError("offset must be non-negative")
    eye = np.eye(v.size)

    def fn(x):
        r = x - v
        return 0.5 * float(r @ A @ r) + offset

    def grad(x):
        return A @ (np.asarray(x, dtype=float) - v)

    def prox(x, w):
        x = np.asarray(x, dtype=float)
        return np.linalg.solve(eye + w * A, x + w * (A @ v))

    return HittingCost(fn, grad, v, float(offset), m, STRONGLY_CONVEX,
                       prox=prox, hess=lambda x: A, label="ellipsoidal",
                       meta={"center": v, "A": A})


def _line_frame(line_point, line_dir):
    p = as_point(line_point, 2)
    e = as_point(line_dir, 2)
    norm = np.linalg.norm(e)
    if norm == 0:
        raise ValueError("line direction must be nonzero")
    e = e / norm
    n = np.array([-e[1], e[0]])
    return p, e, n


def make_tilted_quadratic(m: float, center, line_point, line_dir, tilt: float,
                          on_line_tol: float = 1e-9) -> HittingCost:
    """f(u) = (m/2)||u - center||^2 + tilt * dist(u, line), in the plane.

    The line passes through ``line_point`` with direction ``line_dir``; the
    center must lie on it so that the center is the minimizer.
    """
    if not m > 0:
        raise ValueError(f"m must be positive, got {m}")
    if not tilt > 0:
        raise ValueError("tilt must be positive")
    c = as_point(center, 2)
    p, e, n = _line_frame(line_point, line_dir)
    off = float((c - p) @ n)
    if abs(off) > on_line_tol * max(1.0, float(np.linalg.norm(c - p))):
        raise ValueError(f"center is {off:.3g} away from the line")

    def fn(x):
        r = x - c
        return 0.5 * m * float(r @ r) + tilt * abs(float((x - c) @ n))

    def grad(x):
        x = np.asarray(x, dtype=float)
        s = float((x - c) @ n)
        g = m * (x - c)
        if s != 0.0:
            g = g + tilt * np.sign(s) * n
        return g

    def prox(x, w):
        # separable in the (e, n) frame: shrink along e, soft-threshold along n
        x = np.asarray(x, dtype=float)
        r = x - c
        a = float(r @ e)
        b = float(r @ n)
        a_new = a / (1.0 + w * m)
        b_new = np.sign(b) * max(abs(b) - w * tilt, 0.0) / (1.0 + w * m)
        return c + a_new * e + b_new * n

    return HittingCost(fn, grad, c, 0.0, float(m), STRONGLY_CONVEX, prox=prox,
                       label="tilted_quadratic",
                       meta={"center": c, "normal": n, "direction": e, "tilt": tilt})


def make_piecewise_quasiconvex(m: float) -> HittingCost:
    """1-d cost that is concave on [-1, 0] yet grows like (m/2)x^2 from 0.

    f(x) = (m/2)(1 - (x+1)^2) on [-1, 0] and (m/2)x^2 elsewhere.  At the kinks
    x = -1 and x = 0 the minimum-norm subgradient (zero) is returned.
    """
    if not m > 0:
        raise ValueError(f"m must be positive, got {m}")

    def fn(x):
        t = float(np.asarray(x, dtype=float).ravel()[0])
        if -1.0 <= t <= 0.0:
            return 0.5 * m * (1.0 - (t + 1.0) ** 2)
        return 0.5 * m * t * t

    def grad(x):
        t = float(np.asarray(x, dtype=float).ravel()[0])
        if t == -1.0 or t == 0.0:
            return np.zeros(1)
        if -1.0 < t < 0.0:
            return np.array([-m * (t + 1.0)])
        return np.array([m * t])

    return HittingCost(fn, grad, np.zeros(1), 0.0, float(m), QUASICONVEX_GROWTH,
                       label="piecewise_quasiconvex")


@dataclass
class CostReport:
    n_samples: int
    growth_violation: float
    nonnegativity_violation: float
    min_value_error: float
    gradient_error: float
    tol: float = 1e-8

    @property
    def ok(self) -> bool:
        return (self.growth_violation <= self.tol
                and self.nonnegativity_violation <= self.tol
                and self.min_value_error <= 1e-9
                and self.gradient_error <= 1e-5)


def validate_cost(f: HittingCost, n_samples: int = 100, radius: float = 1.0,
                  seed: int = 0, fd_step: float = 1e-6,
                  m_claimed: Optional[float] = None) -> CostReport:
    """Sample points around the minimizer and report the worst violations.

    Growth is checked against ``f(v) + (m/2)||x - v||^2`` using ``m_claimed``
    if given (negative controls), otherwise ``f.m``.  Gradients are compared to
    central differences, skipping points within a few steps of a kink.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    d = f.d
    v = f.minimizer
    m = f.m if m_claimed is None else m_claimed
    growth = nonneg = grad_err = 0.0
    for _ in range(n_samples):
        direction = rng.normal(size=d)
        direction /= np.linalg.norm(direction)
        x = v + radius * rng.uniform() ** (1.0 / d) * direction
        fx = f(x)
        r = x - v
        growth = max(growth, f.min_value + 0.5 * m * float(r @ r) - fx)
        nonneg = max(nonneg, -fx)
        g = f.grad(x)
        fd = np.empty(d)
        smooth = True
        for i in range(d):
            ei = np.zeros(d)
            ei[i] = fd_step
            fp, fm = f(x + ei), f(x - ei)
            fd[i] = (fp - fm) / (2 * fd_step)
            # second difference far above the curvature flags a kink in the stencil
            if abs(fp - 2 * fx + fm) > 1e3 * max(1.0, m) * fd_step ** 2 + 1e-12 * max(1.0, abs(fx)):
                smooth = False
        if smooth:
            scale = max(1.0, float(np.linalg.norm(fd)))
            grad_err = max(grad_err, float(np.linalg.norm(g - fd)) / scale)
    min_err = abs(f(v) - f.min_value)
    return CostReport(n_samples, max(growth, 0.0), max(nonneg, 0.0), min_err, grad_err)
