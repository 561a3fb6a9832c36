"""Config-driven experiment runner.

Config files are flat ``key = value`` lines; ``#`` starts a comment and
vectors are comma-separated (optionally parenthesised). Subcommands:

* ``solve``: solve the boundary-value problem, write ``trajectory.csv``.
* ``conserve``: solve, then evaluate the discrete Noether quantity and write
  ``trajectory.csv`` and ``conservation.csv``.
* ``transfer-check``: integration-by-parts residuals, truncated series and
  condition-(C) tables for registered function pairs.
* ``dump-matrix``: write the ``A_r`` matrix for ``(r, N)``.

Exit codes: 0 success, 1 invalid input, 2 solver failure, 3 check failure.
Failures print one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import re
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from fracnoether.dynamics import NonConvergence, SolverOptions, solve_bvp
from fracnoether.fracops import DEFAULT_PANELS
from fracnoether.model import LAGRANGIANS, Grid, SymmetryGroup, rotation_group_2d, translation_group
from fracnoether.noether import build_shift_matrix, conserved_quantity, constancy_report, noether_inputs
from fracnoether import transfer

log = logging.getLogger(__name__)

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_CHECK = 0, 1, 2, 3

KINDS = ("solve_and_conserve", "transfer_check", "matrix_dump")
JACOBIAN_CHOICES = ("auto", "finite_difference", "user")

#: Function pairs available to ``transfer_check``.
TRANSFER_PAIRS = {
    "poly_poly": lambda: (transfer.polynomial([1.0, -2.0, 0.5, 1.0]),
                          transfer.polynomial([0.3, 1.0, -1.0, 0.7])),
    "poly_exp": lambda: (transfer.polynomial([1.0, 2.0, -1.0]), transfer.exponential()),
    "poly_polyexp": lambda: (transfer.polynomial([1.0, 2.0, -1.0]),
                             transfer.poly_exp([1.0, -1.0, 0.5], 0.7)),
    "polyexp_poly": lambda: (transfer.poly_exp([0.5, 1.0], -0.6),
                             transfer.polynomial([2.0, 0.0, 1.0, -0.3])),
    "poly_reciprocal": lambda: (transfer.polynomial([1.0, 2.0, -1.0]), transfer.reciprocal()),
}


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every problem found."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "solve_and_conserve"
    a: float = 0.0
    b: float = 1.0
    N: int = 600
    alpha: float = 0.5
    d: int | None = None
    lagrangian: str = "quadratic"
    symmetry: str = "rotation2d"
    Q0: tuple[float, ...] = (1.0, 2.0)
    QN: tuple[float, ...] = (2.0, 1.0)
    max_iters: int = 50
    residual_tol: float = 1.0e-10
    linesearch: bool = True
    jacobian: str = "auto"
    output_path: str = "."
    constancy_tol: float = 1.0e-6
    r: int = 2
    transfer_pairs: tuple[str, ...] = ("poly_poly", "poly_exp", "poly_polyexp")
    p_max: int = 4
    truncation: int = 4
    transfer_tol: float = 1.0e-5
    n_panels: int = DEFAULT_PANELS
    condition_p_max: int = 30
    # keys explicitly present in the source text
    given: frozenset = field(default=frozenset(), compare=False)

    @property
    def dim(self) -> int:
        return self.d if self.d is not None else len(self.Q0)

    def solver_options(self) -> SolverOptions:
        return SolverOptions(
            max_iters=self.max_iters, residual_tol=self.residual_tol, linesearch=self.linesearch,
            jacobian=None if self.jacobian == "auto" else self.jacobian)

    def group(self) -> SymmetryGroup:
        name, direction = _parse_symmetry(self.symmetry)
        return rotation_group_2d() if name == "rotation2d" else translation_group(direction)


# {{{ parsing


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_vector(text: str) -> tuple[float, ...]:
    body = text.strip().strip("()[]")
    if not body:
        raise ValueError("empty vector")
    return tuple(float(x) for x in body.split(","))


def _parse_names(text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _parse_int(text: str) -> int:
    value = float(text)
    if value != int(value):
        raise ValueError(f"not an integer: {text!r}")
    return int(value)


def _parse_symmetry(text: str) -> tuple[str, tuple[float, ...] | None]:
    text = text.strip()
    if text == "rotation2d":
        return text, None
    m = re.fullmatch(r"translation\s*\((.*)\)", text)
    if m:
        return "translation", _parse_vector(m.group(1))
    raise ValueError(f"unknown symmetry {text!r}; expected rotation2d or translation(e1, ..., ed)")


_PARSERS = {
    "kind": str, "a": float, "b": float, "N": _parse_int, "alpha": float, "d": _parse_int,
    "lagrangian": str, "symmetry": str, "Q0": _parse_vector, "QN": _parse_vector,
    "max_iters": _parse_int, "residual_tol": float, "linesearch": _parse_bool, "jacobian": str,
    "output_path": str, "constancy_tol": float, "r": _parse_int, "transfer_pairs": _parse_names,
    "p_max": _parse_int, "truncation": _parse_int, "transfer_tol": float, "n_panels": _parse_int,
    "condition_p_max": _parse_int,
}
assert set(_PARSERS) == {f.name for f in fields(ExperimentConfig)} - {"given"}


def _validate(cfg: ExperimentConfig) -> list[str]:
    errors = []

    def need(ok: bool, key: str, msg: str) -> None:
        if not ok:
            errors.append(f"{key}: {msg}")

    need(cfg.kind in KINDS, "kind", f"must be one of {', '.join(KINDS)}")
    need(cfg.a < cfg.b, "a", f"need a < b, got a = {cfg.a}, b = {cfg.b}")
    need(cfg.N >= 2, "N", f"N >= 2 required, got {cfg.N}")
    need(0.0 < cfg.alpha <= 1.0, "alpha", f"alpha outside (0,1]: {cfg.alpha}")

    if cfg.kind == "solve_and_conserve":
        need(cfg.lagrangian in LAGRANGIANS, "lagrangian",
             f"unknown Lagrangian {cfg.lagrangian!r}; known: {', '.join(LAGRANGIANS)}")
        need(len(cfg.Q0) == len(cfg.QN), "QN", f"Q0 has {len(cfg.Q0)} entries, QN has {len(cfg.QN)}")
        need(all(np.isfinite(cfg.Q0)) and all(np.isfinite(cfg.QN)), "Q0", "endpoint values must be finite")
        if cfg.d is not None:
            need(cfg.d >= 1, "d", f"d >= 1 required, got {cfg.d}")
            need(len(cfg.Q0) == cfg.d, "Q0", f"expected {cfg.d} entries, got {len(cfg.Q0)}")
        try:
            name, direction = _parse_symmetry(cfg.symmetry)
            dim = 2 if name == "rotation2d" else len(direction)
            need(dim == cfg.dim, "symmetry", f"acts on R^{dim} but d = {cfg.dim}")
        except ValueError as exc:
            errors.append(f"symmetry: {exc}")
        need(cfg.max_iters >= 0, "max_iters", f"must be >= 0, got {cfg.max_iters}")
        need(cfg.residual_tol > 0, "residual_tol", f"must be positive, got {cfg.residual_tol}")
        need(cfg.constancy_tol > 0, "constancy_tol", f"must be positive, got {cfg.constancy_tol}")
        need(cfg.jacobian in JACOBIAN_CHOICES, "jacobian", f"must be one of {', '.join(JACOBIAN_CHOICES)}")
    elif cfg.kind == "matrix_dump":
        need(1 <= cfg.r <= cfg.N - 1, "r", f"need 1 <= r <= N - 1, got r = {cfg.r}, N = {cfg.N}")
    elif cfg.kind == "transfer_check":
        unknown = [p for p in cfg.transfer_pairs if p not in TRANSFER_PAIRS]
        need(not unknown, "transfer_pairs",
             f"unknown pairs {unknown}; known: {', '.join(TRANSFER_PAIRS)}")
        need("poly_reciprocal" not in cfg.transfer_pairs or cfg.a > 0, "transfer_pairs",
             "poly_reciprocal needs a > 0")
        need(cfg.p_max >= 1, "p_max", f"must be >= 1, got {cfg.p_max}")
        need(cfg.truncation >= 0, "truncation", f"must be >= 0, got {cfg.truncation}")
        need(cfg.condition_p_max >= 1, "condition_p_max", f"must be >= 1, got {cfg.condition_p_max}")
        need(cfg.transfer_tol > 0, "transfer_tol", f"must be positive, got {cfg.transfer_tol}")
        need(cfg.n_panels >= 1, "n_panels", f"must be >= 1, got {cfg.n_panels}")
    return errors


def parse_config(text: str, default_kind: str | None = None, **overrides) -> ExperimentConfig:
    """Parse and validate a ``key = value`` config.

    ``default_kind`` fills in ``kind`` when the text does not set it. Keyword
    overrides are applied after parsing (already typed values).

    :raises ConfigError: listing every syntax error (with line number),
        unknown key and violated constraint.
    """
    values: dict = {}
    errors = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _PARSERS:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in values:
            errors.append(f"line {lineno}: duplicate key {key!r}")
            continue
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            errors.append(f"line {lineno}: {key}: {exc}")

    values.update({k: v for k, v in overrides.items() if v is not None})
    given = frozenset(values)
    if default_kind is not None:
        values.setdefault("kind", default_kind)
    cfg = ExperimentConfig(**values, given=given)
    errors += _validate(cfg)
    if errors:
        raise ConfigError(errors)
    return cfg


# }}}


# {{{ output


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trajectory_csv(path: Path, trajectory) -> None:
    t = trajectory.grid.nodes
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "t"] + [f"Q{i + 1}" for i in range(trajectory.d)])
        for k, row in enumerate(trajectory.values):
            w.writerow([k, _fmt(t[k])] + [_fmt(x) for x in row])


def write_conservation_csv(path: Path, t: np.ndarray, C: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "t", "C"])
        for k, (tk, ck) in enumerate(zip(t, C)):
            w.writerow([k, _fmt(tk), _fmt(ck)])


def read_trajectory_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(t, Q)`` from a trajectory CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    body = np.array([[float(x) for x in row] for row in rows[1:]])
    return body[:, 1], body[:, 2:]


def matrix_csv(A: np.ndarray) -> str:
    return "".join(",".join(str(int(x)) for x in row) + "\n" for row in A)


# }}}


class ExperimentFailure(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code = code
        self.kind = kind


def _report(summary: dict, quiet: bool) -> None:
    if not quiet:
        print(json.dumps(summary))


def _solve(cfg: ExperimentConfig, out: Path, quiet: bool):
    L = LAGRANGIANS[cfg.lagrangian]()
    grid = Grid(cfg.a, cfg.b, cfg.N)
    try:
        sol = solve_bvp(L, cfg.alpha, grid, cfg.Q0, cfg.QN, opts=cfg.solver_options())
    except NonConvergence as exc:
        write_trajectory_csv(out / "trajectory.csv", exc.best)
        raise ExperimentFailure(EXIT_SOLVER, type(exc).__name__, str(exc)) from exc
    write_trajectory_csv(out / "trajectory.csv", sol.trajectory)
    return L, sol


def run_solve(cfg: ExperimentConfig, out: Path, quiet: bool = False) -> int:
    _, sol = _solve(cfg, out, quiet)
    _report({"command": "solve", "iterations": sol.iterations,
             "residual": sol.residual_norm, "trajectory": str(out / "trajectory.csv")}, quiet)
    return EXIT_OK


def run_conserve(cfg: ExperimentConfig, out: Path, quiet: bool = False) -> int:
    L, sol = _solve(cfg, out, quiet)
    Q = sol.trajectory
    F, G = noether_inputs(L, cfg.group(), Q, cfg.alpha)
    C = conserved_quantity(F, G, cfg.alpha)
    report = constancy_report(C)
    write_conservation_csv(out / "conservation.csv", Q.grid.nodes, C)

    _report({"command": "conserve", "iterations": sol.iterations, "residual": sol.residual_norm,
             "c_ref": report.c_ref, "max_abs_dev": report.max_abs_dev,
             "rel_spread": report.rel_spread, "window": list(report.window),
             "conservation": str(out / "conservation.csv")}, quiet)
    if not report.rel_spread <= cfg.constancy_tol:
        raise ExperimentFailure(
            EXIT_CHECK, "ConstancyFailure",
            f"relative spread {report.rel_spread:.3e} exceeds {cfg.constancy_tol:.1e}")
    return EXIT_OK


def run_matrix_dump(cfg: ExperimentConfig, out: Path | None, quiet: bool = False) -> int:
    A = build_shift_matrix(cfg.r, cfg.N)
    text = matrix_csv(A)
    if out is not None:
        path = out / f"A_r{cfg.r}_N{cfg.N}.csv"
        path.write_text(text)
    if not quiet:
        sys.stdout.write(text)
    return EXIT_OK


def run_transfer_check(cfg: ExperimentConfig, out: Path, quiet: bool = False) -> int:
    a, b = cfg.a, cfg.b
    t_grid = np.linspace(a + 0.2 * (b - a), b - 0.2 * (b - a), 13)
    kw = dict(a=a, b=b, n_panels=cfg.n_panels)

    worst = 0.0
    rows, cond_rows = [], []
    for name in cfg.transfer_pairs:
        f, g = TRANSFER_PAIRS[name]()
        for p in range(1, cfg.p_max + 1):
            res = transfer.leibniz_step_check(f, g, cfg.alpha, p, t_grid, **kw)
            worst = max(worst, res)
            rows.append([name, "step", p, _fmt(res)])
        trunc = transfer.truncated_transfer_sum(f, g, cfg.alpha, cfg.truncation, t_grid, **kw)
        rows.append([name, "tail", cfg.truncation,
                     "nan" if trunc.tail_estimate is None else _fmt(trunc.tail_estimate)])
        diag = transfer.condition_c_diagnostic(f, g, cfg.alpha, cfg.condition_p_max, a=a, b=b)
        for i, p in enumerate(diag.p):
            cond_rows.append([name, int(p), _fmt(diag.b1[i]), _fmt(diag.b2[i]),
                              _fmt(diag.sup_f[i]), _fmt(diag.sup_g[i])])
        _report({"pair": name, "criterion1": diag.criterion1, "criterion2": diag.criterion2,
                 "tail": trunc.tail_estimate}, quiet)

    with open(out / "transfer.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pair", "quantity", "order", "value"])
        w.writerows(rows)
    with open(out / "condition_c.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pair", "p", "b1", "b2", "sup_f", "sup_g"])
        w.writerows(cond_rows)

    _report({"command": "transfer-check", "max_residual": worst, "tol": cfg.transfer_tol}, quiet)
    if not worst <= cfg.transfer_tol:
        raise ExperimentFailure(EXIT_CHECK, "TransferResidual",
                                f"step-identity residual {worst:.3e} exceeds {cfg.transfer_tol:.1e}")
    return EXIT_OK


_RUNNERS = {
    "solve_and_conserve": run_conserve,
    "transfer_check": run_transfer_check,
    "matrix_dump": run_matrix_dump,
}


def run_experiment(cfg: ExperimentConfig, out: str | Path | None = None, quiet: bool = False) -> int:
    """Run ``cfg.kind`` and return the exit status; failures are raised as :class:`ExperimentFailure`."""
    out = Path(out if out is not None else cfg.output_path)
    out.mkdir(parents=True, exist_ok=True)
    return _RUNNERS[cfg.kind](cfg, out, quiet)


# {{{ command line

_COMMANDS = {
    "solve": ("solve_and_conserve", run_solve),
    "conserve": ("solve_and_conserve", run_conserve),
    "transfer-check": ("transfer_check", run_transfer_check),
    "dump-matrix": ("matrix_dump", run_matrix_dump),
}


def _fail(code: int, kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "exit": code, "message": message}) + "\n")
    return code


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="fracnoether", description="Discrete fractional Noether experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="key = value config file")
        p.add_argument("--out", type=Path, help="output directory (overrides output_path)")
        p.add_argument("--quiet", action="store_true", help="suppress stdout summaries")
        if name == "dump-matrix":
            p.add_argument("--r", type=int, help="matrix index r")
            p.add_argument("--N", type=int, help="number of steps N")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.WARNING)
    kind, runner = _COMMANDS[args.command]
    try:
        text = args.config.read_text(encoding="utf-8") if args.config else ""
    except OSError as exc:
        return _fail(EXIT_INVALID, "ConfigError", str(exc))

    overrides = {}
    if args.command == "dump-matrix":
        overrides = {"r": args.r, "N": args.N}
    try:
        cfg = parse_config(text, default_kind=kind, **overrides)
        if cfg.kind != kind:
            raise ConfigError([f"kind: config is for {cfg.kind!r}, not {args.command!r}"])
    except ConfigError as exc:
        return _fail(EXIT_INVALID, "ConfigError", str(exc))

    out = args.out if args.out is not None else Path(cfg.output_path)
    if args.command == "dump-matrix" and args.out is None and "output_path" not in cfg.given:
        out = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    try:
        return runner(cfg, out, args.quiet)
    except ExperimentFailure as exc:
        return _fail(exc.code, exc.kind, str(exc))
    except ValueError as exc:
        return _fail(EXIT_INVALID, "ValueError", str(exc))


# }}}
