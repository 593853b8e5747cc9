import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from socolab.costs import make_piecewise_quasiconvex, make_quadratic, make_tilted_quadratic
from socolab.solver import (
    Composite,
    SolverError,
    SolveSettings,
    balance_residual,
    minimize_strongly_convex,
    obd_balance_search,
    project_sublevel,
)


def quad_composite(A, b):
    A = np.asarray(A, float)
    return Composite(lambda x: 0.5 * float(x @ A @ x) - float(b @ x), lambda x: A @ x - b,
                     float(np.linalg.eigvalsh(A)[0]))


def test_minimize_examples():
    F = Composite(lambda x: 0.5 * float((x - 3) @ (x - 3)), lambda x: x - 3, 1.0)
    assert minimize_strongly_convex(F, [0.0])[0] == pytest.approx(3.0, abs=1e-9)
    m = 0.25
    for lam in (0.01, 0.3, 1.0, 7.0):
        F = Composite(lambda x: 0.5 * m * (1 - x[0]) ** 2 + 0.5 * lam * x[0] ** 2,
                      lambda x: np.array([-m * (1 - x[0]) + lam * x[0]]), m + lam)
        assert minimize_strongly_convex(F, [0.0])[0] == pytest.approx(m / (m + lam), abs=1e-9)


def test_minimize_2d_quadratic_matches_linear_solve():
    A, b = np.array([[3.0, 1.0], [1.0, 0.5]]), np.array([1.0, -2.0])
    x = minimize_strongly_convex(quad_composite(A, b), [5.0, 5.0])
    assert np.allclose(x, np.linalg.solve(A, b), atol=1e-8)


@given(st.lists(st.floats(-50, 50), min_size=2, max_size=2))
def test_minimizer_independent_of_start(x_init):
    F = quad_composite([[2.0, 0.3], [0.3, 0.4]], np.array([0.2, 1.0]))
    x = minimize_strongly_convex(F, x_init)
    ref = minimize_strongly_convex(F, [0.0, 0.0])
    assert np.linalg.norm(x - ref) <= 10 * 1e-9 / F.mu


def test_minimize_errors():
    F = quad_composite([[1.0, 0.0], [0.0, 1e-3]], np.array([1.0, 1.0]))
    with pytest.raises(SolverError) as err:
        minimize_strongly_convex(F, [0.0, 0.0], SolveSettings(max_iters=3))
    assert err.value.x is not None and math.isfinite(err.value.residual)
    bad = Composite(lambda x: math.nan, lambda x: x, 1.0)
    with pytest.raises(SolverError):
        minimize_strongly_convex(bad, [1.0])


def test_project_sublevel_examples():
    f = make_quadratic(1.0, [0.0])
    assert project_sublevel(f, 0.5, [2.0])[0] == pytest.approx(1.0, abs=1e-9)
    assert project_sublevel(f, 3.0, [2.0])[0] == 2.0
    with pytest.raises(ValueError):
        project_sublevel(f, -0.1, [2.0])


def _lattice_projection(f, level, x0, centre, half, n=2000):
    g1 = np.linspace(centre[0] - half, centre[0] + half, n)
    g2 = np.linspace(centre[1] - half, centre[1] + half, n)
    X, Y = np.meshgrid(g1, g2, indexing="ij")
    c, nrm = f.minimizer, f.meta["normal"]
    R1, R2 = X - c[0], Y - c[1]
    vals = 0.5 * f.m * (R1**2 + R2**2) + f.meta["tilt"] * np.abs(R1 * nrm[0] + R2 * nrm[1])
    dist = np.where(vals <= level, (X - x0[0]) ** 2 + (Y - x0[1]) ** 2, np.inf)
    i = np.unravel_index(np.argmin(dist), dist.shape)
    return np.array([X[i], Y[i]]), math.sqrt(dist[i])


def _grid_projection(f, level, x0):
    # coarse 2000x2000 lattice over the sublevel set's enclosing box, then a
    # second 2000x2000 lattice zoomed on the coarse answer: the distance is
    # nearly flat along a smooth boundary, so one lattice pins the value but
    # not the location
    half = math.sqrt(2 * (level - f.min_value) / f.m) * 1.001
    coarse, _ = _lattice_projection(f, level, x0, f.minimizer, half)
    return _lattice_projection(f, level, x0, coarse, 20 * half / 2000)


@pytest.mark.parametrize("seed", range(4))
def test_tilted_projection_matches_dense_grid(seed):
    rng = np.random.default_rng(seed)
    f = make_tilted_quadratic(1.0, [0.3, 0.2], [0.3, 0.2], [1.0, 0.5], 0.5)
    level = rng.uniform(0.05, 0.5)
    x0 = f.minimizer + rng.uniform(1.2, 2.0) * rng.normal(size=2)
    while f(x0) <= level:
        x0 = 2 * x0 - f.minimizer
    got = project_sublevel(f, level, x0)
    ref, ref_dist = _grid_projection(f, level, x0)
    assert f(got) <= level + 1e-9
    assert np.linalg.norm(got - x0) <= ref_dist + 1e-9
    assert np.linalg.norm(got - ref) <= 1e-3


@given(st.floats(0.05, 5), st.floats(0.01, 0.99), st.floats(-3, 3), st.floats(-3, 3))
def test_projection_is_idempotent(m, frac, a, b):
    f = make_tilted_quadratic(m, [0, 0], [0, 0], [1, 1], 0.3)
    x0 = np.array([a, b])
    level = f.min_value + frac * (f(x0) - f.min_value)
    x = project_sublevel(f, level, x0)
    assert np.linalg.norm(project_sublevel(f, level, x) - x) <= 1e-9


@given(st.floats(0.01, 5), st.floats(0.01, 10), st.floats(-3, 3), st.floats(-3, 3))
def test_movement_and_residual_are_monotone_in_level(m, gamma, a, b):
    f = make_tilted_quadratic(m, [0.1, 0], [0, 0], [1, 0], 0.4)
    x0 = np.array([a, b])
    if f(x0) <= f.min_value + 1e-6:
        return
    levels = np.linspace(f.min_value, f(x0), 7)
    moves, resid = [], []
    for lv in levels:
        x = project_sublevel(f, lv, x0)
        moves.append(float(np.linalg.norm(x - x0)))
        resid.append(0.5 * moves[-1] ** 2 - gamma * (lv - f.min_value))
    tol = 1e-7 * (1 + moves[0])
    assert all(moves[i + 1] <= moves[i] + tol for i in range(6))
    assert all(resid[i + 1] <= resid[i] + tol * (1 + moves[0]) for i in range(6))


def test_balance_search_examples():
    f = make_quadratic(1.0, [0.0])
    x, level = obd_balance_search(f, [1.0], 1.0)
    assert x[0] == pytest.approx(0.5, abs=1e-9)
    assert level == pytest.approx(f(x), abs=1e-12)
    x, level = obd_balance_search(f, [0.0], 1.0)
    assert x[0] == 0.0 and level == 0.0


@given(st.floats(1e-3, 10), st.floats(1e-2, 10))
def test_balance_closed_form_1d(m, gamma):
    f = make_quadratic(m, [0.0])
    x, _ = obd_balance_search(f, [1.0], gamma)
    assert x[0] == pytest.approx(1 / (1 + math.sqrt(gamma * m)), abs=1e-7)


def test_balance_on_drift_cost_keeps_the_ratio():
    m, gamma = 0.01, 1.0
    x_prev = 0.0
    for t in range(1, 8):
        x, _ = obd_balance_search(make_quadratic(m, [float(t)]), [x_prev], gamma)
        assert (x[0] - x_prev) / (t - x[0]) == pytest.approx(math.sqrt(gamma * m), rel=1e-7)
        x_prev = x[0]


def test_balance_on_quasiconvex_cost_uses_level_bisection():
    f = make_piecewise_quasiconvex(0.1)
    x, level = obd_balance_search(f, [-1.0], 1.0)
    assert abs(balance_residual(f, x, [-1.0], 1.0)) <= 1e-8
    # closed form: l = m/(2(1+m)), x = -1 + sqrt(1 - 2l/m)
    lv = 0.1 / (2 * 1.1)
    assert x[0] == pytest.approx(-1 + math.sqrt(1 - 2 * lv / 0.1), abs=1e-7)
