"""Fractional operators on uniform grids and on continuous functions.

Discrete side: Grünwald-Letnikov weights and the left/right fractional
differences built from them. Continuous side: Riemann-Liouville integrals
evaluated with product-trapezoid quadrature (the weakly singular power kernel
is integrated exactly against the piecewise-linear interpolant of the
integrand) and Riemann-Liouville derivatives in integrated-by-parts form.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

#: Default number of quadrature panels for the Riemann-Liouville operators.
DEFAULT_PANELS = 2048

_LEFT = {"left", "minus", "-"}
_RIGHT = {"right", "plus", "+"}


class DomainError(ValueError):
    """Raised when an operator is evaluated outside its domain of definition."""


def check_order(alpha: float) -> float:
    """Return ``alpha`` as a float, rejecting orders outside ``(0, 1]``."""
    alpha = float(alpha)
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"fractional order must lie in (0, 1], got {alpha!r}")
    return alpha


def _side(side: str) -> str:
    s = str(side).lower()
    if s in _LEFT:
        return "left"
    if s in _RIGHT:
        return "right"
    raise ValueError(f"unknown side {side!r}; expected 'left'/'minus' or 'right'/'plus'")


# {{{ discrete operators


def gl_coefficients(alpha: float, R: int) -> np.ndarray:
    r"""Grünwald-Letnikov weights :math:`\alpha_0, \dots, \alpha_R`.

    The weights are the Taylor coefficients of :math:`(1 - z)^\alpha`,

    .. math::

        \alpha_0 = 1, \qquad
        \alpha_r = \frac{(-\alpha)(1 - \alpha) \cdots (r - 1 - \alpha)}{r!},

    and are evaluated by the multiplicative recurrence
    :math:`\alpha_r = \alpha_{r-1} (r - 1 - \alpha) / r`, which never forms
    the factorials.

    :arg alpha: order in :math:`(0, 1]`.
    :arg R: index of the last coefficient, ``R >= 0``.
    :returns: array of length ``R + 1``.
    """
    alpha = check_order(alpha)
    R = int(R)
    if R < 0:
        raise ValueError(f"R must be non-negative, got {R}")

    coeffs = np.empty(R + 1)
    coeffs[0] = 1.0
    for r in range(1, R + 1):
        coeffs[r] = coeffs[r - 1] * (r - 1 - alpha) / r

    # alpha = 1 produces -0.0 from r = 2 on; keep the zeros positive
    return coeffs + 0.0


def _as_samples(Q) -> tuple[np.ndarray, float | None]:
    grid = getattr(Q, "grid", None)
    if grid is not None:
        return np.asarray(Q.values, dtype=float), grid.h
    return np.asarray(Q, dtype=float), None


def delta_matrix(side: str, N: int, alpha: float, h: float) -> np.ndarray:
    """Dense matrix of the discrete fractional difference on ``N + 1`` nodes.

    For ``side="minus"`` the matrix has shape ``(N, N + 1)`` and row ``k - 1``
    produces the value at node ``k = 1..N``. For ``side="plus"`` the shape is
    also ``(N, N + 1)`` and row ``k`` produces the value at node ``k = 0..N-1``.
    """
    side = _side(side)
    if N < 1:
        raise ValueError(f"need at least one step, got N = {N}")
    c = gl_coefficients(alpha, N) / h**alpha

    k = np.arange(N + 1)
    lag = k[:, None] - k[None, :]
    if side == "right":
        lag = -lag
    full = np.where(lag >= 0, c[np.clip(lag, 0, N)], 0.0)

    return full[1:] if side == "left" else full[:-1]


def delta(side: str, Q, alpha: float, h: float | None = None) -> np.ndarray:
    r"""Discrete fractional difference of a sampled trajectory.

    .. math::

        (\Delta^\alpha_- Q)_k = h^{-\alpha} \sum_{r=0}^{k} \alpha_r Q_{k-r},
        \quad k = 1, \dots, N,

        (\Delta^\alpha_+ Q)_k = h^{-\alpha} \sum_{r=0}^{N-k} \alpha_r Q_{k+r},
        \quad k = 0, \dots, N - 1.

    :arg side: ``"minus"`` (left, backward memory) or ``"plus"`` (right,
        forward memory).
    :arg Q: a :class:`~fracnoether.model.Trajectory` or an array of shape
        ``(N + 1,)`` or ``(N + 1, d)``; extra leading axes are treated as batch
        axes when ``Q`` is an array of rank 3 or more.
    :arg h: step size; taken from the trajectory grid when omitted.
    :returns: array with ``N`` rows along the node axis. Row ``i`` holds node
        ``i + 1`` for ``"minus"`` and node ``i`` for ``"plus"``.
    """
    side = _side(side)
    alpha = check_order(alpha)
    values, grid_h = _as_samples(Q)
    if h is None:
        h = 1.0 if grid_h is None else grid_h

    node_axis = 0 if values.ndim <= 2 else values.ndim - 2
    N = values.shape[node_axis] - 1
    if N < 1:
        raise ValueError("the discrete fractional difference needs N >= 1")

    c = gl_coefficients(alpha, N)
    x = np.moveaxis(values, node_axis, 0)
    out = np.zeros((N,) + x.shape[1:])
    if side == "left":
        # out[i] holds node k = i + 1
        for r in range(N + 1):
            out[max(r - 1, 0):] += c[r] * x[max(1 - r, 0):N + 1 - r]
    else:
        out += x[:N]
        for r in range(1, N + 1):
            out[:N + 1 - r] += c[r] * x[r:]

    return np.moveaxis(out / h**alpha, 0, node_axis)


# }}}


# {{{ continuous operators


def product_trapezoid_weights(beta: float, M: int) -> np.ndarray:
    r"""Weights for :math:`\int_0^{M\delta} u^{\beta - 1} g(u) \, du` with unit step.

    Returns ``w`` such that the integral of ``u**(beta - 1)`` against the
    piecewise-linear interpolant of ``g`` on the nodes ``u_j = j`` is
    ``sum(w * g(u_j))``. For a step ``delta`` the result scales with
    ``delta**beta``.
    """
    if beta <= 0:
        raise ValueError(f"integration order must be positive, got {beta!r}")
    j = np.arange(M, dtype=float)
    jp = j + 1.0
    # moments of u^(beta - 1) and u^(beta - 1) (u - j) on each panel [j, j + 1]
    m0 = (jp**beta - j**beta) / beta
    m1 = (jp ** (beta + 1) - j ** (beta + 1)) / (beta + 1) - j * m0

    w = np.zeros(M + 1)
    w[:-1] += m0 - m1
    w[1:] += m1
    return w


def _eval(f: Callable, y: np.ndarray) -> np.ndarray:
    fy = np.asarray(f(y), dtype=float)
    if fy.shape[: y.ndim] != y.shape:
        fy = np.broadcast_to(fy, y.shape + fy.shape[y.ndim:])
    return fy


def _check_point(side: str, t: np.ndarray, a: float, b: float) -> None:
    if side == "left":
        bad = (t <= a) | (t > b)
        if np.any(bad):
            raise DomainError(f"left-sided operators need t in (a, b] = ({a}, {b}]")
    else:
        bad = (t < a) | (t >= b)
        if np.any(bad):
            raise DomainError(f"right-sided operators need t in [a, b) = [{a}, {b})")


def rl_integral(
    side: str,
    f: Callable,
    beta: float,
    t,
    *,
    a: float,
    b: float,
    n_panels: int = DEFAULT_PANELS,
) -> np.ndarray:
    r"""Riemann-Liouville fractional integral of order ``beta > 0``.

    .. math::

        I^\beta_- f(t) = \frac{1}{\Gamma(\beta)} \int_a^t (t - y)^{\beta - 1} f(y) \, dy,
        \qquad
        I^\beta_+ f(t) = \frac{1}{\Gamma(\beta)} \int_t^b (y - t)^{\beta - 1} f(y) \, dy.

    Each evaluation point gets its own uniform quadrature grid with
    ``n_panels`` panels between ``t`` and the integration endpoint. The kernel
    is integrated exactly against the linear interpolant of ``f``, so the
    rule is second order in the panel width for smooth ``f`` and exact for
    linear ``f``.

    :arg f: callable accepting an array of times and returning values of the
        same shape (scalar valued) or with one trailing axis (vector valued).
    :arg t: scalar or array of evaluation points, in ``(a, b]`` for the left
        integral and ``[a, b)`` for the right integral.
    """
    side = _side(side)
    beta = float(beta)
    if beta <= 0:
        raise ValueError(f"integration order must be positive, got {beta!r}")
    if not a < b:
        raise ValueError(f"need a < b, got [{a}, {b}]")

    t = np.asarray(t, dtype=float)
    _check_point(side, t, a, b)

    M = int(n_panels)
    w = product_trapezoid_weights(beta, M)
    length = (t - a) if side == "left" else (b - t)
    u = length[..., None] * (np.arange(M + 1) / M)
    y = t[..., None] - u if side == "left" else t[..., None] + u

    fy = _eval(f, y)
    scale = (length / M) ** beta / math.gamma(beta)
    if fy.ndim > y.ndim:
        return scale[..., None] * np.einsum("j,...jd->...d", w, fy)
    return scale * (fy @ w)


def _fd_derivative(f: Callable, y: np.ndarray) -> np.ndarray:
    eps = 1.0e-6 * np.maximum(1.0, np.abs(y))
    hi, lo = _eval(f, y + eps), _eval(f, y - eps)
    if hi.ndim > y.ndim:
        eps = eps[..., None]
    return (hi - lo) / (2.0 * eps)


def rl_derivative(
    side: str,
    f: Callable,
    alpha: float,
    t,
    *,
    a: float,
    b: float,
    df: Callable | None = None,
    n_panels: int = DEFAULT_PANELS,
) -> np.ndarray:
    r"""Riemann-Liouville fractional derivative of order ``alpha`` in ``(0, 1]``.

    Uses the integrated-by-parts forms

    .. math::

        D^\alpha_- f(t) = \frac{f(a) (t - a)^{-\alpha}}{\Gamma(1 - \alpha)}
            + I^{1 - \alpha}_-[f'](t),
        \qquad
        D^\alpha_+ f(t) = \frac{f(b) (b - t)^{-\alpha}}{\Gamma(1 - \alpha)}
            - I^{1 - \alpha}_+[f'](t),

    so the singular integral is never differentiated numerically. For
    ``alpha = 1`` these reduce to :math:`\pm f'(t)`.

    :arg df: derivative of ``f``. When omitted a central finite difference
        with step ``1e-6 * max(1, |y|)`` is used.
    """
    side = _side(side)
    alpha = check_order(alpha)
    t = np.asarray(t, dtype=float)
    _check_point(side, t, a, b)
    if df is None:
        df = lambda y: _fd_derivative(f, y)  # noqa: E731

    sign = 1.0 if side == "left" else -1.0
    if alpha == 1.0:
        return sign * _eval(df, t)

    end = a if side == "left" else b
    dist = (t - a) if side == "left" else (b - t)
    f_end = np.asarray(f(np.asarray(end)), dtype=float)
    boundary = (dist ** (-alpha) / math.gamma(1.0 - alpha))
    integral = rl_integral(side, df, 1.0 - alpha, t, a=a, b=b, n_panels=n_panels)
    if integral.ndim > t.ndim:
        boundary = boundary[..., None]

    return boundary * f_end + sign * integral


# }}}
