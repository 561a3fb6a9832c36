"""Discrete fractional action, Euler-Lagrange residual and the boundary-value solver."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from fracnoether.fracops import check_order, delta, delta_matrix
from fracnoether.model import Grid, Lagrangian, Trajectory

log = logging.getLogger(__name__)

JACOBIANS = ("finite_difference", "user")


class NonConvergence(RuntimeError):
    """Newton iterations were exhausted before the residual tolerance was met.

    The best iterate seen so far is kept on the exception.
    """

    def __init__(self, message: str, best: Trajectory, residual_norm: float, iterations: int):
        super().__init__(message)
        self.best = best
        self.residual_norm = residual_norm
        self.iterations = iterations


class SingularJacobian(NonConvergence):
    """The Newton system could not be solved."""


@dataclass(frozen=True)
class SolverOptions:
    """Damped Newton settings.

    ``jacobian`` is ``"finite_difference"`` or ``"user"``; the latter needs a
    Lagrangian with a ``hessian``. ``None`` selects ``"user"`` whenever the
    Hessian is available. ``max_iters = 0`` only checks the initial guess.
    """

    max_iters: int = 50
    residual_tol: float = 1.0e-10
    linesearch: bool = True
    jacobian: str | None = None

    def __post_init__(self) -> None:
        if int(self.max_iters) != self.max_iters or self.max_iters < 0:
            raise ValueError(f"max_iters must be a non-negative integer, got {self.max_iters!r}")
        if not self.residual_tol > 0:
            raise ValueError(f"residual_tol must be positive, got {self.residual_tol!r}")
        if self.jacobian is not None and self.jacobian not in JACOBIANS:
            raise ValueError(f"jacobian must be one of {JACOBIANS}, got {self.jacobian!r}")


@dataclass(frozen=True)
class BVPSolution:
    trajectory: Trajectory
    residual_norm: float
    iterations: int


def discrete_action(L: Lagrangian, Q: Trajectory, alpha: float) -> float:
    r"""Discrete fractional action :math:`h \sum_{k=1}^N L(Q_k, (\Delta^\alpha_- Q)_k, t_k)`."""
    alpha = check_order(alpha)
    h = Q.grid.h
    v = delta("minus", Q.values, alpha, h)
    return float(h * np.sum(L.eval(Q.values[1:], v, Q.grid.nodes[1:])))


def el_residual(L: Lagrangian, Q: Trajectory, alpha: float) -> np.ndarray:
    r"""Residual of the discrete fractional Euler-Lagrange equation.

    Row ``k - 1`` holds, for ``k = 1..N-1``,

    .. math::

        \partial_x L(Q_k, V_k, t_k) + (\Delta^\alpha_+ G)_k,
        \qquad V = \Delta^\alpha_- Q, \quad G_j = \partial_v L(Q_j, V_j, t_j).

    The result has shape ``(N - 1, d)`` and equals ``1/h`` times the gradient
    of :func:`discrete_action` with respect to the interior nodes.
    """
    alpha = check_order(alpha)
    grid = Q.grid
    t = grid.nodes
    v = delta("minus", Q.values, alpha, grid.h)

    G = np.zeros_like(Q.values)
    G[1:] = L.grad_v(Q.values[1:], v, t[1:])
    back = delta("plus", G, alpha, grid.h)

    return L.grad_x(Q.values[1:-1], v[:-1], t[1:-1]) + back[1:]


class _System:
    """Dense operator form of the Euler-Lagrange equations on a fixed grid."""

    def __init__(self, L: Lagrangian, alpha: float, grid: Grid, q0, qN):
        self.L = L
        self.grid = grid
        self.t = grid.nodes
        self.q0 = q0
        self.qN = qN
        N = grid.N
        # rows k = 1..N acting on nodes 0..N
        self.Dm = delta_matrix("minus", N, alpha, grid.h)
        # rows k = 1..N-1 acting on G_1..G_N
        self.Dp = delta_matrix("plus", N, alpha, grid.h)[1:, 1:]

    def full(self, interior: np.ndarray) -> np.ndarray:
        """Attach the fixed endpoints to (a batch of) interior states."""
        shape = interior.shape[:-2] + (1, interior.shape[-1])
        return np.concatenate(
            [np.broadcast_to(self.q0, shape), interior, np.broadcast_to(self.qN, shape)], axis=-2)

    def residual(self, interior: np.ndarray) -> np.ndarray:
        Q = self.full(interior)
        v = self.Dm @ Q
        G = self.L.grad_v(Q[..., 1:, :], v, self.t[1:])
        return self.L.grad_x(Q[..., 1:-1, :], v[..., :-1, :], self.t[1:-1]) + self.Dp @ G

    def jacobian_fd(self, interior: np.ndarray, chunk: int = 128) -> np.ndarray:
        n_int, d = interior.shape
        n = n_int * d
        x = interior.ravel()
        J = np.empty((n, n))
        for start in range(0, n, chunk):
            cols = np.arange(start, min(start + chunk, n))
            step = 6.0e-6 * np.maximum(1.0, np.abs(x[cols]))
            hi = np.repeat(x[None, :], cols.size, axis=0)
            lo = hi.copy()
            hi[np.arange(cols.size), cols] += step
            lo[np.arange(cols.size), cols] -= step
            r_hi = self.residual(hi.reshape(-1, n_int, d)).reshape(cols.size, n)
            r_lo = self.residual(lo.reshape(-1, n_int, d)).reshape(cols.size, n)
            J[:, cols] = ((r_hi - r_lo) / (2.0 * step[:, None])).T
        return J

    def jacobian_exact(self, interior: np.ndarray) -> np.ndarray:
        Q = self.full(interior)
        N = self.grid.N
        d = Q.shape[-1]
        v = self.Dm @ Q
        Lxx, Lxv, Lvv = (np.asarray(m, dtype=float) for m in self.L.hessian(Q[1:], v, self.t[1:]))
        Lvx = np.swapaxes(Lxv, -1, -2)
        eye = np.eye(N + 1)[1:]

        # derivative of grad_x at k = 1..N-1 with respect to Q_m, m = 0..N
        Jx = (np.einsum("km,kij->kimj", eye[:-1], Lxx[:-1])
              + np.einsum("km,kij->kimj", self.Dm[:-1], Lxv[:-1]))
        # derivative of G_j, j = 1..N
        JG = np.einsum("jm,jab->jamb", eye, Lvx) + np.einsum("jm,jab->jamb", self.Dm, Lvv)
        J = Jx + (self.Dp @ JG.reshape(N, -1)).reshape(N - 1, d, N + 1, d)

        return J[:, :, 1:-1, :].reshape((N - 1) * d, (N - 1) * d)


def solve_bvp(
    L: Lagrangian,
    alpha: float,
    grid: Grid,
    q0,
    qN,
    init: Trajectory | None = None,
    opts: SolverOptions | None = None,
) -> BVPSolution:
    """Solve the discrete fractional Euler-Lagrange equations with fixed endpoints.

    Damped Newton on the ``(N - 1) d`` interior unknowns with a dense LU
    solve per step. The default initial guess is the straight line between
    the endpoints.

    :raises NonConvergence: when ``opts.max_iters`` steps do not bring the
        max-norm of the residual below ``opts.residual_tol``.
    :raises SingularJacobian: when a Newton system cannot be solved.
    """
    alpha = check_order(alpha)
    opts = opts or SolverOptions()
    q0 = np.atleast_1d(np.asarray(q0, dtype=float))
    qN = np.atleast_1d(np.asarray(qN, dtype=float))
    if q0.shape != qN.shape or q0.ndim != 1:
        raise ValueError("endpoint states must be vectors of the same dimension")
    if not (np.all(np.isfinite(q0)) and np.all(np.isfinite(qN))):
        raise ValueError("endpoint states must be finite")

    if init is None:
        init = Trajectory.linear(grid, q0, qN)
    elif init.grid != grid or init.d != q0.size:
        raise ValueError("initial guess does not match the grid or the state dimension")
    elif not (np.array_equal(init.values[0], q0) and np.array_equal(init.values[-1], qN)):
        raise ValueError("initial guess must carry the prescribed endpoint values")

    jacobian = opts.jacobian
    if jacobian is None:
        jacobian = "user" if L.hessian is not None else "finite_difference"
    if jacobian == "user" and L.hessian is None:
        raise ValueError("the 'user' Jacobian needs a Lagrangian with a Hessian")

    system = _System(L, alpha, grid, q0, qN)
    x = np.array(init.values[1:-1])
    F = system.residual(x)
    norm = float(np.max(np.abs(F)))
    best = (norm, x.copy())

    it = 0
    while norm > opts.residual_tol:
        if it >= opts.max_iters:
            raise NonConvergence(
                f"residual {norm:.3e} above {opts.residual_tol:.1e} after {it} Newton steps",
                Trajectory(grid, system.full(best[1])), best[0], it)

        J = system.jacobian_exact(x) if jacobian == "user" else system.jacobian_fd(x)
        try:
            dx = np.linalg.solve(J, -F.ravel()).reshape(x.shape)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(
                f"Newton system is singular at step {it}: {exc}",
                Trajectory(grid, system.full(best[1])), best[0], it) from exc
        if not np.all(np.isfinite(dx)):
            raise SingularJacobian(
                f"Newton step is not finite at step {it}",
                Trajectory(grid, system.full(best[1])), best[0], it)

        lam = 1.0
        merit = np.linalg.norm(F)
        while True:
            x_new = x + lam * dx
            F_new = system.residual(x_new)
            if not opts.linesearch or lam < 2.0**-10:
                break
            if np.linalg.norm(F_new) <= (1.0 - 1.0e-4 * lam) * merit:
                break
            lam *= 0.5

        x, F = x_new, F_new
        norm = float(np.max(np.abs(F)))
        it += 1
        log.debug("newton step %d: damping %.3g, residual %.3e", it, lam, norm)
        if norm < best[0]:
            best = (norm, x.copy())

    return BVPSolution(trajectory=Trajectory(grid, system.full(x)), residual_norm=norm, iterations=it)
