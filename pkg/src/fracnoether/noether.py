"""Discrete fractional Noether conserved quantity.

Given ``F = d phi / ds (0, Q)`` and ``G = d L / dv (Q, Delta_-^alpha Q, t)``
along a solution of the discrete fractional Euler-Lagrange equations, the
sequence

.. math::

    C = \\sum_{r=1}^{N-1} \\alpha_r A_r \\big(F \\cdot \\sigma^r(G)\\big)

has a vanishing backward difference at ``k = 1..N-1``. Three evaluations of
``C`` are provided: :func:`conserved_quantity` (index formula, no matrices),
:func:`conserved_quantity_matrix` (explicit ``A_r``, for testing) and
:func:`conserved_quantity_direct` (cumulative sum of the per-node defects).

Note on the last node: ``A_r`` copies row ``N - 1`` into row ``N`` for
``r >= 2`` while the ``r = 1`` term vanishes at ``N`` (``G_{N+1} = 0``), so
``C_{N-1} - C_N = -alpha_1 F_{N-1} . G_N``. The conserved values are
``C_0, ..., C_{N-1}``, which is the default window of
:func:`constancy_report`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fracnoether.fracops import check_order, delta, gl_coefficients
from fracnoether.model import Lagrangian, SymmetryGroup, Trajectory


def _as_nodes(F, G) -> tuple[np.ndarray, np.ndarray]:
    """Normalise ``F`` (nodes ``0..N``) and ``G`` (nodes ``1..N``) to ``(N + 1, d)``."""
    F = np.asarray(F, dtype=float)
    G = np.asarray(G, dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    if G.ndim == 1:
        G = G[:, None]
    if F.ndim != 2 or G.ndim != 2:
        raise ValueError("F and G must be sequences of vectors")

    n = F.shape[0]
    if G.shape[0] == n - 1:
        G = np.concatenate([np.zeros((1, G.shape[1])), G])
    elif G.shape[0] == n:
        G = G.copy()
        G[0] = 0.0
    else:
        raise ValueError(
            f"G must have N = {n - 1} (nodes 1..N) or N + 1 = {n} rows, got {G.shape[0]}")
    if F.shape[1] != G.shape[1]:
        raise ValueError(f"F and G live in different dimensions: {F.shape[1]} != {G.shape[1]}")
    if n < 3:
        raise ValueError("need N >= 2")
    return F, G


def build_shift_matrix(r: int, N: int) -> np.ndarray:
    """Integer matrix ``A_r`` of size ``(N + 1, N + 1)`` for ``1 <= r <= N - 1``."""
    if N < 2:
        raise ValueError(f"need N >= 2, got {N}")
    if not 1 <= r <= N - 1:
        raise ValueError(f"need 1 <= r <= N - 1 = {N - 1}, got r = {r}")
    if r == 1:
        return -np.eye(N + 1, dtype=int)

    i = np.arange(N + 1)[:, None]
    j = np.arange(N + 1)[None, :]
    lag = i - j
    A = ((j == 0) & (r <= i)).astype(int) - (
        (lag >= 0) & (lag <= r - 1) & (j >= 1) & (j <= N - r)).astype(int)
    A[0] = 0
    A[N] = A[N - 1]
    return A


def shift(G, r: int) -> np.ndarray:
    """``(sigma^r G)_k = G_{k+r}``, zero past the last node."""
    G = np.asarray(G)
    if r < 0:
        raise ValueError(f"shift must be non-negative, got {r}")
    out = np.zeros_like(G)
    if r < G.shape[0]:
        out[: G.shape[0] - r] = G[r:]
    return out


def _shifted_products(F: np.ndarray, G: np.ndarray, r: int) -> np.ndarray:
    """``(F . sigma^r G)_j`` for ``j = 0..N``."""
    out = np.zeros(F.shape[0])
    n = F.shape[0] - r
    if n > 0:
        out[:n] = np.sum(F[:n] * G[r:], axis=-1)
    return out


def conserved_quantity(F, G, alpha: float) -> np.ndarray:
    """Evaluate ``sum_r alpha_r A_r (F . sigma^r G)`` without forming ``A_r``.

    For ``r >= 2`` and ``1 <= i <= N - 1``, row ``i`` of ``A_r`` picks
    ``+P_0`` when ``r <= i`` and ``-P_j`` for ``max(1, i - r + 1) <= j <=
    min(i, N - r)``, where ``P = F . sigma^r G``. The band sums come from
    prefix sums, giving ``O(N^2)`` work overall.

    :arg F: generator values at nodes ``0..N``.
    :arg G: momenta at nodes ``1..N`` (or ``0..N`` with node 0 ignored).
    :returns: the ``N + 1`` values ``C_0, ..., C_N``.
    """
    alpha = check_order(alpha)
    F, G = _as_nodes(F, G)
    N = F.shape[0] - 1
    c = gl_coefficients(alpha, N - 1)
    i = np.arange(1, N)

    total = np.zeros(N + 1, dtype=np.longdouble)
    total -= c[1] * _shifted_products(F, G, 1).astype(np.longdouble)
    if alpha == 1.0:
        return total.astype(float)

    inner = np.zeros(N - 1, dtype=np.longdouble)
    for r in range(2, N):
        P = _shifted_products(F, G, r).astype(np.longdouble)
        prefix = np.concatenate([[0.0], np.cumsum(P[1:])]).astype(np.longdouble)
        lo = np.maximum(1, i - r + 1)
        hi = np.minimum(i, N - r)
        band = np.where(hi >= lo, prefix[np.maximum(hi, 0)] - prefix[lo - 1], 0.0)
        inner += c[r] * (np.where(r <= i, P[0], 0.0) - band)

    total[1:N] += inner
    total[N] += inner[-1]
    return total.astype(float)


def conserved_quantity_matrix(F, G, alpha: float) -> np.ndarray:
    """Reference evaluation that materialises every ``A_r``; ``O(N^3)``."""
    alpha = check_order(alpha)
    F, G = _as_nodes(F, G)
    N = F.shape[0] - 1
    c = gl_coefficients(alpha, N - 1)
    C = np.zeros(N + 1)
    for r in range(1, N):
        C += c[r] * (build_shift_matrix(r, N) @ _shifted_products(F, G, r))
    return C


def conserved_quantity_direct(F, G, alpha: float, h: float = 1.0) -> np.ndarray:
    """Conserved quantity as ``-alpha_1 F . sigma G + H``.

    ``H_i = h * sum_{j=1}^{i} J_j`` is the discrete antiderivative of the
    per-node defects

    ``J_j = [(sum_{r=2}^{j} alpha_r F_{j-r}) . G_j
    - F_j . (sum_{r=2}^{N-j} alpha_r G_{j+r})] / h``

    for ``j = 1..N-1``, with ``H_0 = 0`` and ``H_N = H_{N-1}``.
    """
    alpha = check_order(alpha)
    F, G = _as_nodes(F, G)
    N = F.shape[0] - 1
    c = gl_coefficients(alpha, N)

    J = np.zeros(N + 1)
    for j in range(1, N):
        back = np.zeros(F.shape[1])
        for r in range(2, j + 1):
            back += c[r] * F[j - r]
        ahead = np.zeros(F.shape[1])
        for r in range(2, N - j + 1):
            ahead += c[r] * G[j + r]
        J[j] = (back @ G[j] - F[j] @ ahead) / h

    H = h * np.cumsum(J)
    H[0] = 0.0
    H[N] = H[N - 1]
    return -c[1] * _shifted_products(F, G, 1) + H


def noether_inputs(L: Lagrangian, group: SymmetryGroup, Q: Trajectory, alpha: float):
    """Generator values ``F`` and momenta ``G`` along a trajectory.

    Returns two ``(N + 1, d)`` arrays. ``G`` is only defined at nodes ``1..N``;
    its row 0 is zero and is never read by the conserved quantity.
    """
    alpha = check_order(alpha)
    if group.d is not None and group.d != Q.d:
        raise ValueError(f"group acts on R^{group.d} but the trajectory lives in R^{Q.d}")
    F = np.asarray(group.generator(Q.values), dtype=float)
    if F.shape != Q.values.shape:
        raise ValueError("group generator changed the shape of the trajectory")

    v = delta("minus", Q.values, alpha, Q.grid.h)
    G = np.zeros_like(Q.values)
    G[1:] = L.grad_v(Q.values[1:], v, Q.grid.nodes[1:])
    return F, G


def invariance_defect(F, G, alpha: float, h: float) -> np.ndarray:
    """``(Delta_-^alpha F)_k . G_k - F_k . (Delta_+^alpha G)_k`` for ``k = 1..N-1``.

    Vanishes along solutions of an invariant system.
    """
    F, G = _as_nodes(F, G)
    dF = delta("minus", F, alpha, h)[:-1]
    dG = delta("plus", G, alpha, h)[1:]
    return np.sum(dF * G[1:-1], axis=-1) - np.sum(F[1:-1] * dG, axis=-1)


@dataclass(frozen=True)
class ConservationReport:
    """Constancy statistics of a sampled conserved quantity.

    ``max_abs_dev`` is the largest ``|C_k - c_ref|`` over the nodes in
    ``window`` (inclusive bounds) and ``rel_spread`` divides it by
    ``max(|c_ref|, 1e-300)``.
    """

    C: np.ndarray
    c_ref: float
    max_abs_dev: float
    rel_spread: float
    window: tuple[int, int]


def constancy_report(C, window: tuple[int, int] | None = None) -> ConservationReport:
    """Summarise how constant ``C`` is.

    The reference value is ``C_1``. The default window is nodes ``0..N-1``,
    the range on which the discrete Noether identity forces constancy.
    """
    C = np.asarray(C, dtype=float)
    N = C.size - 1
    if N < 2:
        raise ValueError("need N >= 2")
    lo, hi = (0, N - 1) if window is None else window
    if not 0 <= lo <= hi <= N:
        raise ValueError(f"window {window} does not fit nodes 0..{N}")

    c_ref = float(C[1])
    dev = float(np.max(np.abs(C[lo:hi + 1] - c_ref)))
    return ConservationReport(
        C=C, c_ref=c_ref, max_abs_dev=dev,
        rel_spread=dev / max(abs(c_ref), 1.0e-300), window=(lo, hi),
    )
