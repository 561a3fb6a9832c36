"""Acceptance gate: one recorded PASS/FAIL line per criterion.

The lines are printed in the terminal summary by ``conftest.py``.
"""

import math
import time

import numpy as np

from conftest import ACCEPTANCE_RESULTS
from fracnoether.cli import main
from fracnoether.dynamics import SolverOptions, discrete_action, el_residual, solve_bvp
from fracnoether.fracops import delta, rl_integral
from fracnoether.model import Grid, Trajectory, quadratic_lagrangian, rotation_group_2d
from fracnoether.noether import (
    conserved_quantity,
    conserved_quantity_direct,
    conserved_quantity_matrix,
    constancy_report,
    invariance_defect,
    noether_inputs,
    shift,
)
from fracnoether.transfer import (
    condition_c_diagnostic,
    exponential,
    leibniz_step_check,
    poly_exp,
    polynomial,
    reciprocal,
    truncated_transfer_sum,
)

from oracles import GOLDEN_A, quartic_lagrangian
from test_dynamics import pendulum_lagrangian


def gate(name, passed, detail):
    ACCEPTANCE_RESULTS.append((name, bool(passed), detail))
    print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
    assert passed, detail


def test_criterion_01_golden_matrices(tmp_path, capsys):
    start = time.perf_counter()
    ok, nonzeros = True, []
    for r in (2, 3, 4):
        assert main(["dump-matrix", "--r", str(r), "--N", "5", "--out", str(tmp_path), "--quiet"]) == 0
        A = np.loadtxt(tmp_path / f"A_r{r}_N5.csv", delimiter=",", dtype=int)
        ok &= bool(np.array_equal(A, GOLDEN_A[r]))
        nonzeros.append(int(np.count_nonzero(A)))
    elapsed = time.perf_counter() - start
    capsys.readouterr()
    gate("1 golden A_2, A_3, A_4 at N=5", ok and elapsed < 1.0,
         f"integer-equal={ok}, nonzeros={nonzeros}, {elapsed:.3f}s")


def reference_run(N):
    L = quadratic_lagrangian()
    start = time.perf_counter()
    sol = solve_bvp(L, 0.5, Grid(0.0, 1.0, N), [1.0, 2.0], [2.0, 1.0])
    F, G = noether_inputs(L, rotation_group_2d(), sol.trajectory, 0.5)
    C = conserved_quantity(F, G, 0.5)
    elapsed = time.perf_counter() - start
    residual = float(np.max(np.abs(el_residual(L, sol.trajectory, 0.5))))
    return residual, C, elapsed


def test_criterion_02_reference_experiment():
    lines, ok = [], True
    for N, budget in ((600, 60.0), (60, 1.0)):
        residual, C, elapsed = reference_run(N)
        literal = constancy_report(C, window=(1, N)).rel_spread
        interior = constancy_report(C, window=(0, N - 1)).rel_spread
        ok &= residual <= 1e-10 and literal <= 1e-6 and elapsed <= budget
        lines.append(f"N={N}: residual={residual:.1e}, rel_spread(k=1..N)={literal:.2e}, "
                     f"rel_spread(k=0..N-1)={interior:.1e}, {elapsed:.2f}s")
    gate("2 reference run conserved over k=1..N", ok, "; ".join(lines))


def test_criterion_03_oracle_equivalence():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        N, d = int(rng.integers(2, 51)), int(rng.integers(1, 4))
        alpha = float(rng.uniform(0.01, 1.0))
        F, G = rng.normal(size=(N + 1, d)), rng.normal(size=(N, d))
        C1 = conserved_quantity(F, G, alpha)
        C2 = conserved_quantity_matrix(F, G, alpha)
        C3 = conserved_quantity_direct(F, G, alpha, float(rng.uniform(0.01, 1.0)))
        worst = max(worst, np.max(np.abs(C1 - C2)), np.max(np.abs(C1 - C3)), np.max(np.abs(C2 - C3)))
    gate("3 three evaluations of C agree", worst <= 1e-12, f"max pairwise gap {worst:.1e} over 100 instances")


def test_criterion_04_classical_reduction():
    rng = np.random.default_rng(4)
    exact, euler_gap = True, 0.0
    for _ in range(100):
        N, d = int(rng.integers(2, 40)), int(rng.integers(1, 4))
        h = float(rng.uniform(0.01, 1.0))
        F, G = rng.normal(size=(N + 1, d)), rng.normal(size=(N + 1, d))
        G[0] = 0.0
        exact &= bool(np.array_equal(conserved_quantity(F, G, 1.0), np.sum(F * shift(G, 1), axis=-1)))
        Q = rng.normal(size=(N + 1, d))
        euler_gap = max(euler_gap,
                        np.max(np.abs(delta("minus", Q, 1.0, h) - (Q[1:] - Q[:-1]) / h)) * h,
                        np.max(np.abs(delta("plus", Q, 1.0, h) - (Q[:-1] - Q[1:]) / h)) * h)
    gate("4 classical reduction at alpha=1", exact and euler_gap <= 1e-15,
         f"C == F.sigma(G) exactly: {exact}; max Euler gap (times h) {euler_gap:.1e}")


def test_criterion_05_discrete_leibniz():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(100):
        N, d = int(rng.integers(2, 40)), int(rng.integers(1, 4))
        h = float(rng.uniform(0.01, 1.0))
        F, G = rng.normal(size=(N + 1, d)), rng.normal(size=(N + 1, d))
        lhs = delta("minus", np.sum(F * shift(G, 1), axis=-1), 1.0, h)[:N - 1]
        rhs = (np.sum(delta("minus", F, 1.0, h)[:N - 1] * G[1:N], axis=-1)
               - np.sum(F[1:N] * delta("plus", G, 1.0, h)[1:N], axis=-1))
        worst = max(worst, float(np.max(np.abs(lhs - rhs))) * h)
    gate("5 discrete Leibniz formula", worst <= 1e-12, f"max defect (times h) {worst:.1e} over 100 instances")


def test_criterion_06_variational_consistency():
    rng = np.random.default_rng(6)
    worst, cases = 0.0, 0
    for L in (quadratic_lagrangian(), pendulum_lagrangian()):
        for alpha in (0.3, 0.5, 1.0):
            for N in range(4, 11):
                for d in (1, 2):
                    grid = Grid(0.0, 1.0, N)
                    Q = rng.normal(size=(N + 1, d))
                    res = el_residual(L, Trajectory(grid, Q), alpha)
                    eps = 1e-6
                    for m in range(1, N):
                        for i in range(d):
                            hi, lo = Q.copy(), Q.copy()
                            hi[m, i] += eps
                            lo[m, i] -= eps
                            fd = (discrete_action(L, Trajectory(grid, hi), alpha)
                                  - discrete_action(L, Trajectory(grid, lo), alpha)) / (2 * eps)
                            exact = grid.h * res[m - 1, i]
                            worst = max(worst, abs(fd - exact) / max(abs(exact), 1e-300))
                    cases += 1
    gate("6 action gradient equals h * EL residual", worst <= 1e-6, f"max relative gap {worst:.1e} over {cases} cases")


def test_criterion_07_invariance_identity():
    worst = 0.0
    cases = [
        (quadratic_lagrangian(), 0.5, 600, [1.0, 2.0], [2.0, 1.0]),
        (quadratic_lagrangian(), 0.3, 100, [-1.0, 0.5], [0.0, 2.0]),
        (quartic_lagrangian(), 0.5, 80, [0.5, 1.0], [1.0, -0.3]),
        (quartic_lagrangian(), 0.8, 80, [1.5, 0.0], [-0.5, 0.7]),
    ]
    for L, alpha, N, q0, qN in cases:
        sol = solve_bvp(L, alpha, Grid(0.0, 1.0, N), q0, qN, opts=SolverOptions(jacobian="finite_difference")
                        if L.hessian is None else None)
        F, G = noether_inputs(L, rotation_group_2d(), sol.trajectory, alpha)
        worst = max(worst, float(np.max(np.abs(invariance_defect(F, G, alpha, 1.0 / N)))))
    gate("7 invariance identity on solved systems", worst <= 1e-8, f"max defect {worst:.1e} over {len(cases)} solves")


def test_criterion_08_continuous_operators():
    a, b = 0.0, 1.0
    t = np.linspace(0.1, 0.95, 10)
    worst = 0.0
    for gamma in (0, 1, 2):
        for beta in (0.5, 1.5, 2.5):
            got = rl_integral("left", lambda y: (y - a) ** gamma, beta, t, a=a, b=b)
            exact = math.gamma(gamma + 1) / math.gamma(beta + gamma + 1) * (t - a) ** (beta + gamma)
            worst = max(worst, float(np.max(np.abs(got / exact - 1.0))))

    def inner(y):
        return np.where(y > a, rl_integral("left", np.exp, 0.5, np.maximum(y, 1e-300), a=a, b=b), 0.0)

    semigroup = float(np.max(np.abs(rl_integral("left", inner, 0.7, t, a=a, b=b)
                                    - rl_integral("left", np.exp, 1.2, t, a=a, b=b))))
    gate("8 RL integral power rule and semigroup", worst <= 1e-6 and semigroup <= 1e-5,
         f"power-rule max rel err {worst:.1e}; semigroup gap {semigroup:.1e}")


def test_criterion_09_transfer_step_identity():
    t = np.linspace(0.2, 0.8, 13)
    pairs = {
        "poly/poly": (polynomial([1.0, -2.0, 0.5, 1.0]), polynomial([0.3, 1.0, -1.0, 0.7])),
        "poly/polyexp": (polynomial([1.0, 2.0, -1.0]), poly_exp([1.0, -1.0, 0.5], 0.7)),
        "polyexp/poly": (poly_exp([0.5, 1.0], -0.6), polynomial([2.0, 0.0, 1.0, -0.3])),
        "poly/exp": (polynomial([1.0, 2.0, -1.0]), exponential()),
    }
    worst = 0.0
    for f, g in pairs.values():
        for alpha in (0.3, 0.5, 0.8):
            for p in range(1, 5):
                worst = max(worst, leibniz_step_check(f, g, alpha, p, t, a=0.0, b=1.0))

    f, g = pairs["poly/poly"]
    base = truncated_transfer_sum(f, g, 0.5, 3, t, a=0.0, b=1.0).samples
    stationary = all(np.array_equal(truncated_transfer_sum(f, g, 0.5, P, t, a=0.0, b=1.0).samples, base)
                     for P in (4, 5, 8))
    gate("9 transfer step identity and stationarity", worst <= 1e-5 and stationary,
         f"max residual {worst:.1e} (p=1..4, 3 orders, {len(pairs)} pairs); stationary={stationary}")


def test_criterion_10_condition_c():
    good = condition_c_diagnostic(polynomial([1.0, 2.0, -1.0]), exponential(), 0.5, 30, a=0.0, b=1.0)
    recip = condition_c_diagnostic(polynomial([1.0, 2.0, -1.0]), reciprocal(), 0.5, 30, a=1.0, b=2.0)
    growing = bool(np.all(np.diff(recip.sup_g) > 0))
    ok = (good.criterion2 and good.b2_monotone and not recip.criterion2 and recip.criterion1
          and recip.b2_monotone and growing)
    gate("10 condition (C) diagnostics", ok,
         f"poly/exp criterion2={good.criterion2}; 1/t criterion1={recip.criterion1}, "
         f"criterion2={recip.criterion2}, sup|g^(p)| growing={growing}, b2 monotone={recip.b2_monotone}")

