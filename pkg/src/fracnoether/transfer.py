"""Continuous transfer-formula machinery.

Checks the per-order integration-by-parts identity

.. math::

    D^\\alpha_- f \\cdot g = (-1)^p I^{p-\\alpha}_- f \\cdot g^{(p)}
        + \\frac{d}{dt} \\sum_{r=0}^{p-1} (-1)^r I^{r+1-\\alpha}_- f \\cdot g^{(r)}

(and its right-sided mirror), evaluates truncations of the resulting series
and tabulates the sufficient conditions for its convergence. Derivatives of
``f`` and ``g`` always come from analytic oracles: repeated numerical
differentiation is not accurate enough here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from fracnoether.fracops import DEFAULT_PANELS, check_order, rl_derivative, rl_integral

# {{{ smooth functions


@dataclass(frozen=True)
class SmoothFunction:
    """A function ``[a, b] -> R^d`` with analytic derivatives.

    ``value(t)`` and ``derivative(p, t)`` map an array of times of shape
    ``(...)`` to values of shape ``(..., d)``. ``max_order`` is the highest
    available derivative, ``None`` meaning unlimited.
    """

    value: Callable
    derivative: Callable
    d: int = 1
    max_order: int | None = None
    name: str = "custom"

    def __call__(self, t):
        return self.value(t)

    def has_order(self, p: int) -> bool:
        return self.max_order is None or p <= self.max_order

    def deriv(self, p: int) -> Callable:
        if not self.has_order(p):
            raise ValueError(f"{self.name}: derivative of order {p} is not available "
                             f"(max_order = {self.max_order})")
        if p == 0:
            return self.value
        return lambda t: self.derivative(p, t)


def _column(fn: Callable) -> Callable:
    return lambda t: np.asarray(fn(np.asarray(t, dtype=float)), dtype=float)[..., None]


def polynomial(coeffs: Sequence[float], name: str | None = None) -> SmoothFunction:
    """Scalar polynomial with coefficients in increasing degree."""
    poly = Polynomial(np.asarray(coeffs, dtype=float))

    def derivative(p, t):
        return _column(poly.deriv(p))(t)

    return SmoothFunction(_column(poly), derivative, name=name or f"poly{poly.degree()}")


def exponential(rate: float = 1.0, scale: float = 1.0) -> SmoothFunction:
    """``scale * exp(rate * t)``."""

    def derivative(p, t):
        return _column(lambda s: scale * rate**p * np.exp(rate * s))(t)

    return SmoothFunction(lambda t: derivative(0, t), derivative, name="exp")


def poly_exp(coeffs: Sequence[float], rate: float = 1.0) -> SmoothFunction:
    """``P(t) exp(rate t)``; derivatives by the Leibniz rule."""
    poly = Polynomial(np.asarray(coeffs, dtype=float))

    def derivative(p, t):
        t = np.asarray(t, dtype=float)
        acc = np.zeros_like(t)
        for k in range(min(p, poly.degree()) + 1):
            acc = acc + math.comb(p, k) * rate ** (p - k) * poly.deriv(k)(t)
        return (acc * np.exp(rate * t))[..., None]

    return SmoothFunction(lambda t: derivative(0, t), derivative, name="poly_exp")


def reciprocal() -> SmoothFunction:
    """``1 / t``; only meaningful on intervals with ``a > 0``."""

    def derivative(p, t):
        t = np.asarray(t, dtype=float)
        return ((-1.0) ** p * float(math.factorial(p)) * t ** (-p - 1.0))[..., None]

    return SmoothFunction(lambda t: derivative(0, t), derivative, name="reciprocal")


def vector(*components: SmoothFunction) -> SmoothFunction:
    """Stack scalar functions into an ``R^d``-valued one."""
    orders = [c.max_order for c in components]
    max_order = None if all(o is None for o in orders) else min(o for o in orders if o is not None)

    def derivative(p, t):
        return np.concatenate([c.deriv(p)(t) for c in components], axis=-1)

    return SmoothFunction(
        lambda t: derivative(0, t), derivative,
        d=sum(c.d for c in components), max_order=max_order,
        name="(" + ", ".join(c.name for c in components) + ")",
    )


def derivative_mismatch(fn: SmoothFunction, t, p_max: int, step: float = 1.0e-5) -> float:
    """Largest relative gap between ``derivative(p)`` and a central difference of ``derivative(p - 1)``."""
    t = np.asarray(t, dtype=float)
    worst = float(np.max(np.abs(fn.deriv(0)(t) - fn.value(t))))
    for p in range(1, p_max + 1):
        lower = fn.deriv(p - 1)
        fd = (lower(t + step) - lower(t - step)) / (2.0 * step)
        exact = fn.deriv(p)(t)
        scale = max(1.0, float(np.max(np.abs(exact))))
        worst = max(worst, float(np.max(np.abs(fd - exact))) / scale)
    return worst


# }}}


def _dot(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    return np.sum(u * w, axis=-1)


def iterated_rl_integral(
    side: str, f: SmoothFunction, r: int, alpha: float, t, *,
    a: float, b: float, n_panels: int = DEFAULT_PANELS,
) -> np.ndarray:
    """Fractional integral of order ``r + 1 - alpha`` of ``f``.

    Order zero (``r = 0`` with ``alpha = 1``) is the identity.
    """
    alpha = check_order(alpha)
    if r < 0:
        raise ValueError(f"need r >= 0, got {r}")
    order = r + 1 - alpha
    if order == 0:
        return f.value(np.asarray(t, dtype=float))
    return rl_integral(side, f.value, order, t, a=a, b=b, n_panels=n_panels)


def _bracket(side, f, g, alpha, p, t, a, b, n_panels):
    """``sum_{r<p} (-1)^r I_-^{r+1-a} f . g^(r)`` or ``sum_{r<p} f^(r) . I_+^{r+1-a} g``."""
    acc = np.zeros(np.shape(t))
    for r in range(p):
        if side == "left":
            acc += (-1) ** r * _dot(iterated_rl_integral("left", f, r, alpha, t, a=a, b=b, n_panels=n_panels),
                                    g.deriv(r)(t))
        else:
            acc += _dot(f.deriv(r)(t),
                        iterated_rl_integral("right", g, r, alpha, t, a=a, b=b, n_panels=n_panels))
    return acc


def _ddt(fn: Callable, t: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order central difference of ``fn`` at ``t``."""
    offsets = np.array([-2.0, -1.0, 1.0, 2.0])
    vals = fn(t[:, None] + h * offsets)
    return (vals[:, 0] - 8.0 * vals[:, 1] + 8.0 * vals[:, 2] - vals[:, 3]) / (12.0 * h)


def _aux_step(t_grid: np.ndarray, a: float, b: float, h_aux: float | None) -> float:
    if h_aux is None:
        spacing = np.min(np.diff(np.sort(t_grid))) if t_grid.size > 1 else (b - a) / 8.0
        h_aux = spacing / 8.0
    if np.any(t_grid - 2 * h_aux <= a) or np.any(t_grid + 2 * h_aux >= b):
        raise ValueError("t_grid must stay at least 2 * h_aux away from both endpoints")
    return float(h_aux)


def leibniz_step_check(
    f: SmoothFunction,
    g: SmoothFunction,
    alpha: float,
    p: int,
    t_grid,
    *,
    a: float,
    b: float,
    side: str = "both",
    n_panels: int = DEFAULT_PANELS,
    h_aux: float | None = None,
) -> float:
    """Largest discrepancy in the order-``p`` integration-by-parts identity.

    Left identity: ``D_-^a f . g = (-1)^p I_-^{p-a} f . g^(p) + d/dt U_p``;
    right identity: ``-f . D_+^a g = -f^(p) . I_+^{p-a} g + d/dt V_p``. The
    time derivative of the brackets ``U_p``, ``V_p`` is a fourth-order central
    difference with step ``h_aux`` (default: an eighth of the ``t_grid``
    spacing).

    :arg side: ``"left"``, ``"right"`` or ``"both"``.
    """
    alpha = check_order(alpha)
    if p < 1:
        raise ValueError(f"need p >= 1, got {p}")
    if side not in ("left", "right", "both"):
        raise ValueError(f"unknown side {side!r}")
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    h = _aux_step(t, a, b, h_aux)
    kw = dict(a=a, b=b, n_panels=n_panels)

    worst = 0.0
    if side in ("left", "both"):
        gp = g.deriv(p)
        lhs = _dot(rl_derivative("left", f.value, alpha, t, df=f.deriv(1), **kw), g.value(t))
        rhs = ((-1) ** p * _dot(iterated_rl_integral("left", f, p - 1, alpha, t, **kw), gp(t))
               + _ddt(lambda s: _bracket("left", f, g, alpha, p, s, a, b, n_panels), t, h))
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    if side in ("right", "both"):
        fp = f.deriv(p)
        lhs = -_dot(f.value(t), rl_derivative("right", g.value, alpha, t, df=g.deriv(1), **kw))
        rhs = (-_dot(fp(t), iterated_rl_integral("right", g, p - 1, alpha, t, **kw))
               + _ddt(lambda s: _bracket("right", f, g, alpha, p, s, a, b, n_panels), t, h))
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


@dataclass(frozen=True)
class TruncationResult:
    P: int
    t: np.ndarray
    samples: np.ndarray
    #: ``None`` when derivatives of order ``P + 1`` are unavailable
    tail_estimate: float | None


def transfer_series(
    f: SmoothFunction, g: SmoothFunction, alpha: float, P: int, t, *,
    a: float, b: float, n_panels: int = DEFAULT_PANELS,
) -> np.ndarray:
    """Partial sum ``sum_{r=0}^{P} (-1)^r I_-^{r+1-a} f . g^(r) + f^(r) . I_+^{r+1-a} g``."""
    alpha = check_order(alpha)
    if P < 0:
        raise ValueError(f"need P >= 0, got {P}")
    t = np.asarray(t, dtype=float)
    return (_bracket("left", f, g, alpha, P + 1, t, a, b, n_panels)
            + _bracket("right", f, g, alpha, P + 1, t, a, b, n_panels))


def truncated_transfer_sum(
    f: SmoothFunction,
    g: SmoothFunction,
    alpha: float,
    P: int,
    t_grid,
    *,
    a: float,
    b: float,
    n_panels: int = DEFAULT_PANELS,
) -> TruncationResult:
    """Sample the transfer series truncated after ``r = P``.

    The tail estimate is the size of the first omitted cross terms,
    ``max_t |I_-^{P+1-a} f . g^(P+1)| + |f^(P+1) . I_+^{P+1-a} g|``.
    """
    if not (f.has_order(P) and g.has_order(P)):
        raise ValueError(f"truncation order {P} exceeds the available derivatives")
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    kw = dict(a=a, b=b, n_panels=n_panels)
    samples = transfer_series(f, g, alpha, P, t, **kw)

    tail = None
    if f.has_order(P + 1) and g.has_order(P + 1):
        left = _dot(iterated_rl_integral("left", f, P, alpha, t, **kw), g.deriv(P + 1)(t))
        right = _dot(f.deriv(P + 1)(t), iterated_rl_integral("right", g, P, alpha, t, **kw))
        tail = float(np.max(np.abs(left) + np.abs(right)))
    return TruncationResult(P=P, t=t, samples=samples, tail_estimate=tail)


# {{{ condition (C) diagnostics


@dataclass(frozen=True)
class ConditionCReport:
    """Sampled sufficient conditions for convergence of the transfer series.

    Criterion 1 asks ``b1(p) = max (b - t)^{p-1} / (p-1)! |f^(p)|`` and
    ``b2(p) = max (t - a)^{p-1} / (p-1)! |g^(p)|`` to tend to zero; criterion 2
    asks all derivatives of ``f`` and ``g`` to share a uniform bound.
    ``cross_left``/``cross_right`` bound the actual cross terms
    ``|I_-^{p-a} f . g^(p)|`` and ``|f^(p) . I_+^{p-a} g|`` through ``b2``/``b1``.
    Both criteria are judged on finitely many ``p`` and are only indicative.
    """

    p: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    sup_f: np.ndarray
    sup_g: np.ndarray
    cross_left: np.ndarray
    cross_right: np.ndarray
    b1_monotone: bool
    b2_monotone: bool
    criterion1: bool
    criterion2: bool


def _non_increasing(seq: np.ndarray) -> bool:
    scale = max(float(np.max(np.abs(seq))), 1.0e-300)
    return bool(np.all(np.diff(seq) <= 1.0e-12 * scale))


def _tends_to_zero(seq: np.ndarray, rtol: float) -> bool:
    peak = float(np.max(seq))
    if peak == 0.0:
        return True
    tail = seq[len(seq) // 2:]
    return bool(seq[-1] <= rtol * peak and _non_increasing(tail))


def _bounded(seq: np.ndarray, growth: float) -> bool:
    half = max(1, len(seq) // 2)
    head = float(np.max(seq[:half]))
    return bool(np.max(seq[half:], initial=0.0) <= growth * max(head, 1.0e-300)) if head > 0 \
        else bool(np.max(seq) == 0.0)


def condition_c_diagnostic(
    f: SmoothFunction,
    g: SmoothFunction,
    alpha: float,
    p_max: int,
    t_grid=None,
    *,
    a: float,
    b: float,
    zero_rtol: float = 1.0e-6,
    growth: float = 10.0,
) -> ConditionCReport:
    """Tabulate the condition-(C) bounds for ``p = 1..p_max``.

    Criterion 1 passes when both ``b1`` and ``b2`` end non-increasing at or
    below ``zero_rtol`` times their peak. Criterion 2 passes when the sup
    norms over the second half of the sampled orders stay within ``growth``
    times those over the first half.
    """
    alpha = check_order(alpha)
    if p_max < 1 or not (f.has_order(p_max) and g.has_order(p_max)):
        raise ValueError(f"p_max = {p_max} is not within the available derivative orders")
    t = np.linspace(a, b, 201) if t_grid is None else np.asarray(t_grid, dtype=float)

    p = np.arange(1, p_max + 1)
    b1, b2, sup_f, sup_g = (np.empty(p_max) for _ in range(4))
    for i, order in enumerate(p):
        df = np.linalg.norm(f.deriv(order)(t), axis=-1)
        dg = np.linalg.norm(g.deriv(order)(t), axis=-1)
        fact = math.factorial(order - 1)
        b1[i] = np.max((b - t) ** (order - 1) / fact * df)
        b2[i] = np.max((t - a) ** (order - 1) / fact * dg)
        sup_f[i], sup_g[i] = np.max(df), np.max(dg)

    scale = (b - a) ** (1 - alpha) / math.gamma(2 - alpha)
    sup_f0 = float(np.max(np.linalg.norm(f.value(t), axis=-1)))
    sup_g0 = float(np.max(np.linalg.norm(g.value(t), axis=-1)))

    return ConditionCReport(
        p=p, b1=b1, b2=b2, sup_f=sup_f, sup_g=sup_g,
        cross_left=sup_f0 * scale * b2,
        cross_right=sup_g0 * scale * b1,
        b1_monotone=_non_increasing(b1),
        b2_monotone=_non_increasing(b2),
        criterion1=_tends_to_zero(b1, zero_rtol) and _tends_to_zero(b2, zero_rtol),
        criterion2=_bounded(sup_f, growth) and _bounded(sup_g, growth),
    )


# }}}
