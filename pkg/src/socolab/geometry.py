"""Points, potentials and Bregman divergences.

Every movement cost in the lab is a Bregman divergence ``D_h(x || y)`` generated
by a :class:`Potential`.  Points are plain 1-d float64 numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

SIMPLEX_SUM_TOL = 1e-9
SIMPLEX_FLOOR_TOL = 1e-12


class DomainError(ValueError):
    """A point lies outside the domain of a potential or cost."""


def as_point(x, d: Optional[int] = None) -> np.ndarray:
    p = np.atleast_1d(np.asarray(x, dtype=np.float64)).ravel()
    if p.size == 0:
        raise DomainError("points need at least one coordinate")
    if not np.all(np.isfinite(p)):
        raise DomainError(f"non-finite coordinates: {p}")
    if d is not None and p.size != d:
        raise DomainError(f"expected dimension {d}, got {p.size}")
    return p


@dataclass(frozen=True)
class Potential:
    """Mirror map ``h`` with its gradient and (alpha, beta) constants.

    ``domain`` is ``"all"`` (all of R^d) or ``"floored_simplex"``, in which case
    ``delta`` is the coordinate floor.
    """

    name: str
    d: int
    h: Callable[[np.ndarray], float]
    grad_h: Callable[[np.ndarray], np.ndarray]
    alpha: float
    beta: float
    domain: str = "all"
    delta: float = 0.0
    norm_id: str = "euclidean"

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta >= self.alpha):
            raise ValueError(f"need 0 < alpha <= beta, got {self.alpha}, {self.beta}")
        if self.domain not in ("all", "floored_simplex"):
            raise ValueError(f"unknown domain {self.domain!r}")

    @property
    def is_squared_l2(self) -> bool:
        return self.name == "squared_l2"

    def check(self, x) -> np.ndarray:
        """Return ``x`` as a point, raising :class:`DomainError` if outside the domain."""
        p = as_point(x, self.d)
        if self.domain == "floored_simplex":
            if abs(p.sum() - 1.0) > SIMPLEX_SUM_TOL:
                raise DomainError(f"coordinates sum to {p.sum()!r}, not 1")
            if p.min() < self.delta - SIMPLEX_FLOOR_TOL:
                raise DomainError(f"coordinate {p.min()!r} below floor {self.delta}")
        return p

    def contains(self, x) -> bool:
        try:
            self.check(x)
        except DomainError:
            return False
        return True

    def project(self, x) -> np.ndarray:
        """Euclidean projection onto the domain."""
        p = as_point(x, self.d)
        if self.domain == "all":
            return p
        return project_floored_simplex(p, self.delta)


def bregman(p: Potential, x, y) -> float:
    """D_h(x || y) = h(x) - h(y) - <grad h(y), x - y>."""
    x = p.check(x)
    y = p.check(y)
    if p.is_squared_l2:
        # exact form avoids cancellation between h(x) and h(y)
        diff = x - y
        return 0.5 * float(diff @ diff)
    val = p.h(x) - p.h(y) - float(p.grad_h(y) @ (x - y))
    return max(val, 0.0)


@dataclass(frozen=True)
class MovementCost:
    """c(x, x_prev) = D_h(x || x_prev)."""

    potential: Potential

    def __call__(self, x, x_prev) -> float:
        return bregman(self.potential, x, x_prev)

    @property
    def d(self) -> int:
        return self.potential.d


def make_squared_l2_potential(d: int) -> Potential:
    if d < 1:
        raise ValueError("dimension must be >= 1")

    def h(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * float(x @ x)

    def grad_h(x):
        return np.array(x, dtype=float, copy=True)

    return Potential("squared_l2", d, h, grad_h, alpha=1.0, beta=1.0)


def make_negentropy_potential(d: int, delta: float) -> Potential:
    """Negative entropy on the floored simplex; D_h is the KL divergence there.

    Constants are the usual ones for this domain: alpha = 1/(2 ln 2) and
    beta = 1/(delta ln 2).
    """
    if d < 2:
        raise ValueError("negative entropy needs d >= 2")
    if not (0.0 < delta < 1.0 / d):
        raise ValueError(f"delta must lie in (0, 1/d) = (0, {1.0 / d}), got {delta}")

    def h(x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise DomainError("negative entropy needs positive coordinates")
        return float(np.sum(x * np.log(x)))

    def grad_h(x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise DomainError("negative entropy needs positive coordinates")
        return np.log(x) + 1.0

    ln2 = math.log(2.0)
    return Potential(
        "negentropy", d, h, grad_h,
        alpha=1.0 / (2.0 * ln2), beta=1.0 / (delta * ln2),
        domain="floored_simplex", delta=delta,
    )


def project_simplex(v: np.ndarray, radius: float = 1.0) -> np.ndarray:
    """Euclidean projection onto {z >= 0, sum z = radius} (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - radius
    ind = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def project_floored_simplex(x: np.ndarray, delta: float) -> np.ndarray:
    d = x.size
    z = project_simplex(x - delta, 1.0 - d * delta)
    return z + delta
