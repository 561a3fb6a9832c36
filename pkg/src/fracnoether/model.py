"""Grids, trajectories, Lagrangians and one-parameter symmetry groups."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from fracnoether.fracops import check_order, delta

#: Sampled group parameters used when checking invariance.
DEFAULT_S_SAMPLES = (-0.5, -0.1, 0.1, 0.5)


@dataclass(frozen=True)
class Grid:
    """Uniform partition of ``[a, b]`` into ``N`` steps."""

    a: float
    b: float
    N: int

    def __post_init__(self) -> None:
        if not self.a < self.b:
            raise ValueError(f"need a < b, got [{self.a}, {self.b}]")
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"need an integer N >= 2, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.N

    @property
    def nodes(self) -> np.ndarray:
        t = self.a + self.h * np.arange(self.N + 1)
        t[-1] = self.b
        return t


@dataclass(frozen=True)
class Trajectory:
    """Values ``Q_0, ..., Q_N`` in ``R^d`` sampled on a :class:`Grid`."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        q = np.array(self.values, dtype=float)
        if q.ndim == 1:
            q = q[:, None]
        if q.ndim != 2 or q.shape[0] != self.grid.N + 1:
            raise ValueError(
                f"expected {self.grid.N + 1} rows of states, got shape {np.shape(self.values)}")
        if not np.all(np.isfinite(q)):
            raise ValueError("trajectory contains non-finite values")
        q.setflags(write=False)
        object.__setattr__(self, "values", q)

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @classmethod
    def linear(cls, grid: Grid, q0, qN) -> "Trajectory":
        """Straight line from ``q0`` at ``a`` to ``qN`` at ``b``."""
        q0 = np.atleast_1d(np.asarray(q0, dtype=float))
        qN = np.atleast_1d(np.asarray(qN, dtype=float))
        s = np.linspace(0.0, 1.0, grid.N + 1)[:, None]
        values = (1.0 - s) * q0 + s * qN
        values[0], values[-1] = q0, qN
        return cls(grid, values)


@dataclass(frozen=True)
class Lagrangian:
    r"""A Lagrangian :math:`L(x, v, t)` with its partial gradients.

    All callables are applied to batches: ``x`` and ``v`` have shape
    ``(..., d)`` and ``t`` has shape ``(...)``. ``eval`` returns shape
    ``(...)`` and the gradients return ``(..., d)``.

    ``hessian``, when given, returns the blocks ``(L_xx, L_xv, L_vv)`` each of
    shape ``(..., d, d)`` with ``L_xv[..., i, j] = d^2 L / dx_i dv_j``. The
    boundary-value solver uses it to assemble an exact Newton Jacobian.
    """

    eval: Callable
    grad_x: Callable
    grad_v: Callable
    hessian: Callable | None = None
    name: str = "custom"

    def __call__(self, x, v, t):
        return self.eval(x, v, t)

    @classmethod
    def from_function(cls, fn: Callable, name: str = "custom") -> "Lagrangian":
        """Wrap ``fn(x, v, t)`` with central finite-difference gradients.

        The step in each coordinate is ``1e-6 * max(1, |x_i|)``.
        """

        def partial(wrt: int) -> Callable:
            def grad(x, v, t):
                args = [np.asarray(x, dtype=float), np.asarray(v, dtype=float)]
                base = args[wrt]
                out = np.empty(np.broadcast_shapes(args[0].shape, args[1].shape))
                for i in range(base.shape[-1]):
                    step = 1.0e-6 * np.maximum(1.0, np.abs(base[..., i]))
                    hi, lo = base.copy(), base.copy()
                    hi[..., i] += step
                    lo[..., i] -= step
                    args_hi, args_lo = list(args), list(args)
                    args_hi[wrt], args_lo[wrt] = hi, lo
                    out[..., i] = (fn(*args_hi, t) - fn(*args_lo, t)) / (2.0 * step)
                return out

            return grad

        return cls(eval=fn, grad_x=partial(0), grad_v=partial(1), name=name)


@dataclass(frozen=True)
class SymmetryGroup:
    """One-parameter group of diffeomorphisms ``phi(s, .)`` of ``R^d``.

    ``generator(x)`` is the infinitesimal generator ``d phi / ds (0, x)``.
    Both callables act on arrays of shape ``(..., d)``.
    """

    phi: Callable
    generator: Callable
    d: int | None = None
    name: str = "custom"


# {{{ built-in models


def quadratic_lagrangian() -> Lagrangian:
    """``L(x, v, t) = (|x|^2 + |v|^2) / 2``."""

    def hessian(x, v, t):
        x = np.asarray(x, dtype=float)
        eye = np.broadcast_to(np.eye(x.shape[-1]), x.shape + (x.shape[-1],))
        return eye, np.zeros_like(eye), eye

    return Lagrangian(
        eval=lambda x, v, t: 0.5 * (np.sum(np.square(x), axis=-1) + np.sum(np.square(v), axis=-1)),
        grad_x=lambda x, v, t: np.asarray(x, dtype=float) * 1.0,
        grad_v=lambda x, v, t: np.asarray(v, dtype=float) * 1.0,
        hessian=hessian,
        name="quadratic",
    )


def kinetic_lagrangian() -> Lagrangian:
    """Free particle, ``L(x, v, t) = |v|^2 / 2``."""

    def hessian(x, v, t):
        v = np.asarray(v, dtype=float)
        eye = np.broadcast_to(np.eye(v.shape[-1]), v.shape + (v.shape[-1],))
        zero = np.zeros_like(eye)
        return zero, zero, eye

    return Lagrangian(
        eval=lambda x, v, t: 0.5 * np.sum(np.square(v), axis=-1),
        grad_x=lambda x, v, t: np.zeros_like(np.asarray(v, dtype=float)),
        grad_v=lambda x, v, t: np.asarray(v, dtype=float) * 1.0,
        hessian=hessian,
        name="kinetic",
    )


def bilinear_lagrangian() -> Lagrangian:
    """``L(x, v, t) = x . v``; not invariant under translations."""

    def hessian(x, v, t):
        x = np.asarray(x, dtype=float)
        eye = np.broadcast_to(np.eye(x.shape[-1]), x.shape + (x.shape[-1],))
        zero = np.zeros_like(eye)
        return zero, eye, zero

    return Lagrangian(
        eval=lambda x, v, t: np.sum(np.asarray(x) * np.asarray(v), axis=-1),
        grad_x=lambda x, v, t: np.asarray(v, dtype=float) * 1.0,
        grad_v=lambda x, v, t: np.asarray(x, dtype=float) * 1.0,
        hessian=hessian,
        name="bilinear",
    )


def rotation_group_2d() -> SymmetryGroup:
    """Rotations of the plane by angle ``s``; generator ``(-x2, x1)``."""

    def phi(s, x):
        x = np.asarray(x, dtype=float)
        c, sn = np.cos(s), np.sin(s)
        return np.stack([c * x[..., 0] - sn * x[..., 1], sn * x[..., 0] + c * x[..., 1]], axis=-1)

    def generator(x):
        x = np.asarray(x, dtype=float)
        return np.stack([-x[..., 1], x[..., 0]], axis=-1)

    return SymmetryGroup(phi=phi, generator=generator, d=2, name="rotation2d")


def translation_group(direction: Sequence[float]) -> SymmetryGroup:
    """Translations ``phi(s, x) = x + s e`` along a fixed direction ``e``."""
    e = np.atleast_1d(np.asarray(direction, dtype=float))

    return SymmetryGroup(
        phi=lambda s, x: np.asarray(x, dtype=float) + s * e,
        generator=lambda x: np.broadcast_to(e, np.shape(x)).copy(),
        d=e.size,
        name="translation",
    )


LAGRANGIANS: dict[str, Callable[[], Lagrangian]] = {
    "quadratic": quadratic_lagrangian,
    "kinetic": kinetic_lagrangian,
    "bilinear": bilinear_lagrangian,
}


# }}}


# {{{ consistency checks


def gradient_mismatch(L: Lagrangian, d: int, *, n_probes: int = 8, seed: int = 0) -> float:
    """Largest relative gap between the gradient oracles and central differences."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_probes):
        x, v = rng.normal(size=d), rng.normal(size=d)
        t = float(rng.uniform())
        for wrt, oracle in ((0, L.grad_x), (1, L.grad_v)):
            fd = np.empty(d)
            for i in range(d):
                step = 1.0e-5 * max(1.0, abs((x, v)[wrt][i]))
                args_hi = [x.copy(), v.copy()]
                args_lo = [x.copy(), v.copy()]
                args_hi[wrt][i] += step
                args_lo[wrt][i] -= step
                fd[i] = (L.eval(*args_hi, t) - L.eval(*args_lo, t)) / (2 * step)
            exact = np.asarray(oracle(x, v, t), dtype=float)
            scale = max(1.0, float(np.max(np.abs(exact))))
            worst = max(worst, float(np.max(np.abs(fd - exact))) / scale)
    return worst


def group_defects(group: SymmetryGroup, d: int, *, n_probes: int = 8, seed: int = 0) -> dict[str, float]:
    """Measure the group axioms on random probe points.

    Returns the largest observed violation of ``phi(0, x) = x``, of the
    composition law, and of the generator against a central difference in
    ``s``.
    """
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n_probes, d))
    s1, s2 = rng.uniform(-1, 1, size=2)
    eps = 1.0e-6

    identity = np.max(np.abs(group.phi(0.0, x) - x))
    composition = np.max(np.abs(group.phi(s1, group.phi(s2, x)) - group.phi(s1 + s2, x)))
    fd = (group.phi(eps, x) - group.phi(-eps, x)) / (2 * eps)
    generator = np.max(np.abs(fd - group.generator(x)))
    return {
        "identity": float(identity),
        "composition": float(composition),
        "generator": float(generator),
    }


@dataclass(frozen=True)
class InvarianceReport:
    max_deviation: float
    passed: bool
    tol: float
    per_s: dict[float, float] = field(default_factory=dict)


def invariance_check(
    L: Lagrangian,
    group: SymmetryGroup,
    Q: Trajectory,
    alpha: float,
    s_samples: Sequence[float] = DEFAULT_S_SAMPLES,
    tol: float = 1.0e-10,
) -> InvarianceReport:
    """Compare the Lagrangian along ``Q`` and along its transformed copies.

    For every sampled ``s`` the group is applied node-wise to ``Q`` and the
    transformed trajectory is differenced; the values of ``L`` at nodes
    ``1..N`` are then compared against those of the original trajectory.
    Whether ``Q`` actually solves the discrete Euler-Lagrange equation is left
    to the caller.
    """
    alpha = check_order(alpha)
    if len(s_samples) == 0:
        raise ValueError("need at least one sample of the group parameter")
    if group.d is not None and group.d != Q.d:
        raise ValueError(f"group acts on R^{group.d} but the trajectory lives in R^{Q.d}")

    t = Q.grid.nodes[1:]
    h = Q.grid.h
    reference = L.eval(Q.values[1:], delta("minus", Q.values, alpha, h), t)

    per_s = {}
    for s in s_samples:
        moved = np.asarray(group.phi(s, Q.values), dtype=float)
        if moved.shape != Q.values.shape:
            raise ValueError("group action changed the shape of the trajectory")
        value = L.eval(moved[1:], delta("minus", moved, alpha, h), t)
        per_s[float(s)] = float(np.max(np.abs(value - reference)))

    worst = max(per_s.values())
    return InvarianceReport(max_deviation=worst, passed=worst <= tol, tol=tol, per_s=per_s)


# }}}
