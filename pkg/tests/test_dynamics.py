import numpy as np
import pytest

from fracnoether.dynamics import (
    BVPSolution,
    NonConvergence,
    SolverOptions,
    discrete_action,
    el_residual,
    solve_bvp,
)
from fracnoether.model import Grid, Lagrangian, Trajectory, kinetic_lagrangian, quadratic_lagrangian

from oracles import el_residual_loop, quadratic_bvp_loop

ZERO = Lagrangian(
    eval=lambda x, v, t: np.zeros(np.shape(x)[:-1]),
    grad_x=lambda x, v, t: np.zeros(np.broadcast_shapes(np.shape(x), np.shape(v))),
    grad_v=lambda x, v, t: np.zeros(np.broadcast_shapes(np.shape(x), np.shape(v))),
)


def pendulum_lagrangian():
    """``|v|^2 / 2 + sum cos x``: nonlinear, with an exact Hessian."""

    def hessian(x, v, t):
        x = np.asarray(x, dtype=float)
        d = x.shape[-1]
        eye = np.eye(d)
        return -np.cos(x)[..., :, None] * eye, np.zeros(x.shape + (d,)), np.broadcast_to(eye, x.shape + (d,))

    return Lagrangian(
        eval=lambda x, v, t: 0.5 * np.sum(np.square(v), axis=-1) + np.sum(np.cos(x), axis=-1),
        grad_x=lambda x, v, t: -np.sin(np.asarray(x, dtype=float)),
        grad_v=lambda x, v, t: np.asarray(v, dtype=float) * 1.0,
        hessian=hessian,
        name="pendulum",
    )


# {{{ action and residual


def test_action_examples():
    g = Grid(0.0, 1.0, 2)
    Q = Trajectory(g, [0.0, 1.0, 2.0])
    assert discrete_action(ZERO, Q, 0.5) == 0.0
    assert discrete_action(kinetic_lagrangian(), Q, 1.0) == pytest.approx(2.0, abs=1e-14)

    c = 1.7
    g = Grid(0.0, 2.0, 8)
    potential = Lagrangian.from_function(lambda x, v, t: 0.5 * np.sum(x**2, axis=-1))
    got = discrete_action(potential, Trajectory(g, np.full(9, c)), 0.3)
    assert got == pytest.approx(g.h * g.N * c**2 / 2, rel=1e-14)


def test_residual_examples():
    g = Grid(0.0, 1.0, 7)
    line = Trajectory.linear(g, [0.0, -1.0], [2.0, 3.0])
    np.testing.assert_allclose(el_residual(kinetic_lagrangian(), line, 1.0), 0.0, atol=1e-11)
    res = el_residual(ZERO, line, 0.5)
    assert res.shape == (6, 2)
    assert np.all(res == 0.0)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 1.0])
@pytest.mark.parametrize("make", [quadratic_lagrangian, pendulum_lagrangian])
def test_residual_matches_double_loop(rng, alpha, make):
    L = make()
    g = Grid(0.0, 1.0, 6)
    Q = rng.normal(size=(7, 2))
    expected = el_residual_loop(L.grad_x, L.grad_v, Q, alpha, g.h, g.nodes)
    np.testing.assert_allclose(el_residual(L, Trajectory(g, Q), alpha), expected, rtol=1e-12, atol=1e-12)


def test_residual_order_one_is_classical(rng):
    L = pendulum_lagrangian()
    g = Grid(0.0, 1.0, 12)
    Q = rng.normal(size=(13, 2))
    h = g.h
    V = (Q[1:] - Q[:-1]) / h
    # d/dQ_k of h L(Q_k, V_k) + h L(Q_{k+1}, V_{k+1}), divided by h
    classical = -np.sin(Q[1:-1]) + (V[:-1] - V[1:]) / h
    np.testing.assert_allclose(el_residual(L, Trajectory(g, Q), 1.0), classical, rtol=1e-12, atol=1e-10)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 1.0])
def test_residual_is_scaled_action_gradient(rng, alpha):
    L = pendulum_lagrangian()
    g = Grid(0.0, 1.5, 7)
    Q = rng.normal(size=(8, 2))
    res = el_residual(L, Trajectory(g, Q), alpha)
    eps = 1e-6
    for m in range(1, 7):
        for i in range(2):
            hi, lo = Q.copy(), Q.copy()
            hi[m, i] += eps
            lo[m, i] -= eps
            fd = (discrete_action(L, Trajectory(g, hi), alpha) - discrete_action(L, Trajectory(g, lo), alpha)) / (2 * eps)
            assert fd == pytest.approx(g.h * res[m - 1, i], rel=1e-6, abs=1e-8)


# }}}


# {{{ solver


def test_free_particle_is_linear():
    sol = solve_bvp(kinetic_lagrangian(), 1.0, Grid(0.0, 1.0, 4), [0.0], [1.0])
    assert isinstance(sol, BVPSolution)
    np.testing.assert_allclose(sol.trajectory.values[:, 0], [0.0, 0.25, 0.5, 0.75, 1.0], atol=1e-15)
    assert sol.iterations == 0


def test_quadratic_matches_linear_system_oracle():
    sol = solve_bvp(quadratic_lagrangian(), 0.5, Grid(0.0, 1.0, 5), [1.0], [2.0])
    expected = quadratic_bvp_loop(0.5, 0.0, 1.0, 5, 1.0, 2.0)
    np.testing.assert_allclose(sol.trajectory.values[:, 0], expected, rtol=1e-12)


@pytest.mark.parametrize("jacobian", ["user", "finite_difference"])
def test_nonlinear_solve(jacobian):
    L = pendulum_lagrangian()
    grid = Grid(0.0, 2.0, 40)
    sol = solve_bvp(L, 0.6, grid, [0.3, -1.0], [1.2, 0.5], opts=SolverOptions(jacobian=jacobian))
    Q = sol.trajectory
    assert np.array_equal(Q.values[0], [0.3, -1.0])
    assert np.array_equal(Q.values[-1], [1.2, 0.5])
    assert np.max(np.abs(el_residual(L, Q, 0.6))) <= 1e-10
    assert sol.residual_norm <= 1e-10


def test_finite_difference_lagrangian_solve():
    L = Lagrangian.from_function(lambda x, v, t: 0.5 * np.sum(v**2, axis=-1) + np.sum(np.cos(x), axis=-1))
    sol = solve_bvp(L, 0.5, Grid(0.0, 1.0, 10), [0.0], [1.0], opts=SolverOptions(residual_tol=1e-8))
    assert np.max(np.abs(el_residual(L, sol.trajectory, 0.5))) <= 1e-8
    reference = solve_bvp(pendulum_lagrangian(), 0.5, Grid(0.0, 1.0, 10), [0.0], [1.0])
    np.testing.assert_allclose(sol.trajectory.values, reference.trajectory.values, atol=1e-6)


def test_reference_problem_converges_fast():
    opts = SolverOptions(residual_tol=1e-11)
    sol = solve_bvp(quadratic_lagrangian(), 0.5, Grid(0.0, 1.0, 600), [1.0, 2.0], [2.0, 1.0], opts=opts)
    assert sol.iterations <= 3
    assert np.max(np.abs(el_residual(quadratic_lagrangian(), sol.trajectory, 0.5))) <= 1e-11


def test_zero_iterations_raise_with_best_iterate():
    grid = Grid(0.0, 1.0, 10)
    with pytest.raises(NonConvergence) as info:
        solve_bvp(quadratic_lagrangian(), 0.5, grid, [1.0], [2.0], opts=SolverOptions(max_iters=0))
    assert info.value.iterations == 0
    np.testing.assert_array_equal(info.value.best.values, Trajectory.linear(grid, [1.0], [2.0]).values)
    assert info.value.residual_norm > 0


def test_custom_init_must_match_endpoints():
    grid = Grid(0.0, 1.0, 4)
    bad = Trajectory(grid, np.zeros(5))
    with pytest.raises(ValueError):
        solve_bvp(kinetic_lagrangian(), 1.0, grid, [0.0], [1.0], init=bad)


def test_solver_options_validation():
    for kw in [dict(max_iters=-1), dict(residual_tol=0.0), dict(jacobian="newton")]:
        with pytest.raises(ValueError):
            SolverOptions(**kw)
    with pytest.raises(ValueError):
        solve_bvp(Lagrangian.from_function(lambda x, v, t: 0 * x[..., 0]), 0.5, Grid(0.0, 1.0, 4), [0.0], [1.0],
                  opts=SolverOptions(jacobian="user"))


# }}}
