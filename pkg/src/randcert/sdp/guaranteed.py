"""Device-independent guaranteed randomness from the witness-constrained programs.

For a witness reading, every one of the sixteen probabilities is maximised
over the chosen outer approximation of the quantum set; the largest optimum
``p*`` is the adversary's guessing probability and ``-log2 p*`` the bound.
Level L0 is the no-signalling polytope, handled as a linear program over
convex weights on its 24 vertices.
"""

from __future__ import annotations

import csv
import functools
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from ..behavior import OUTCOMES, Behavior, WitnessKind, WitnessSpec
from ..vertices import catalog
from .npa import (
    Level,
    WitnessConstraints,
    _prob_functionals,
    _row_functional,
    build_problem,
    moment_matrix,
    witness_constraints,
)
from .solver import SdpProblem, SdpStatus, SolverOptions, lmi_margin, solve_sdp

__all__ = [
    "InfeasibleWitnessError",
    "DiResult",
    "ns_lp",
    "ns_lp_highs",
    "di_guaranteed",
    "witness_domain",
    "relaxation_maximum",
    "di_curve",
    "write_curve_csv",
    "relaxation_margin",
    "CURVE_POINTS",
]

CURVE_POINTS = 60
# cells whose optima agree this closely count as tied; the first in flat order wins
TIE_TOL = 1e-7


class InfeasibleWitnessError(ValueError):
    """No behavior in the relaxation reproduces the requested witness reading."""


@dataclass(frozen=True)
class DiResult:
    """Outcome of a guaranteed-randomness computation.

    ``cell`` is ``(x, y, a, b)`` with 0-based settings; ``status`` is the worst
    status over the sixteen programs (``MaxIter`` marks a value that may be
    inaccurate).
    """

    witness: WitnessSpec
    level: Level
    p_star: float
    cell: tuple[int, int, int, int]
    duality_gap: float
    status: SdpStatus
    cell_values: tuple[float, ...]

    @property
    def bits(self) -> float:
        return max(0.0, -math.log2(self.p_star)) if self.p_star > 0 else float("inf")

    def __float__(self) -> float:
        return self.bits

    @property
    def cell_label(self) -> str:
        x, y, a, b = self.cell
        return f"X{x + 1}Y{y + 1}({'+' if a == 1 else '-'},{'+' if b == 1 else '-'})"


def _constraint_rows(constraints) -> tuple[np.ndarray, np.ndarray]:
    if constraints is None:
        return np.zeros((0, 16)), np.zeros(0)
    if isinstance(constraints, WitnessConstraints):
        return constraints.rows()
    rows, rhs = constraints
    return np.atleast_2d(np.asarray(rows, dtype=float)), np.atleast_1d(np.asarray(rhs, dtype=float))


def _sign_definite_zero(row, rhs) -> bool:
    return rhs == 0.0 and (np.all(row >= 0) or np.all(row <= 0))


def _two_row_lp(C, V, a, t, maximize: bool) -> np.ndarray:
    """Exact optimum of ``C @ V.T @ w`` over ``w >= 0, sum w = 1, a @ w = t``.

    A basic feasible solution of this two-row program has at most two
    nonzero weights, so enumerating vertices on the level ``t`` and segments
    crossing it is exhaustive.
    """
    d = a - t
    tol = 1e-12 * max(1.0, float(np.abs(a).max(initial=0.0)))
    pts = [V[np.abs(d) <= tol]]
    i, j = np.nonzero((d[:, None] < -tol) & (d[None, :] > tol))
    if i.size:
        lam = d[j] / (d[j] - d[i])
        pts.append(lam[:, None] * V[i] + (1 - lam)[:, None] * V[j])
    pts = np.vstack(pts)
    if not len(pts):
        raise InfeasibleWitnessError("no no-signalling behavior satisfies the constraints")
    vals = C @ pts.T
    return vals.max(axis=1) if maximize else vals.min(axis=1)


def _lp_highs(c, A_eq, b_eq, maximize: bool) -> float:
    res = linprog(-c if maximize else c, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status == 2:
        raise InfeasibleWitnessError("no no-signalling behavior satisfies the constraints")
    if res.status != 0:
        raise RuntimeError(f"linear program failed: {res.message}")
    return float(c @ res.x)


def _lp(objectives: np.ndarray, constraints, maximize: bool) -> np.ndarray:
    V = catalog().matrix()  # (24, 16)
    rows, rhs = _constraint_rows(constraints)
    # a zero on a sign-definite row removes every vertex that touches it
    keep = np.ones(len(V), dtype=bool)
    live = []
    for r, t in zip(rows, rhs):
        if _sign_definite_zero(r, t):
            keep &= np.abs(V @ r) == 0.0
        else:
            live.append((r, t))
    V = V[keep]
    if not len(V):
        raise InfeasibleWitnessError("no no-signalling behavior satisfies the constraints")
    if not live:
        vals = objectives @ V.T
        return vals.max(axis=1) if maximize else vals.min(axis=1)
    if len(live) == 1:
        r, t = live[0]
        return _two_row_lp(objectives, V, V @ r, float(t), maximize)
    A_eq = np.vstack([np.array([r for r, _ in live]) @ V.T, np.ones((1, len(V)))])
    b_eq = np.array([t for _, t in live] + [1.0])
    return np.array([_lp_highs(c @ V.T, A_eq, b_eq, maximize) for c in objectives])


def ns_lp(objective, constraints=None, maximize: bool = True):
    """Optimise ``objective @ P`` over the no-signalling polytope.

    Parameters
    ----------
    objective : array_like, shape (16,) or (k, 16)
        Linear functional(s) on the flat probability vector.
    constraints : WitnessConstraints or (rows, rhs), optional
        Equalities ``rows @ P = rhs``.
    maximize : bool
        Direction of optimisation.

    Returns
    -------
    float or ndarray
        One optimum per objective row.

    Raises
    ------
    InfeasibleWitnessError
        When no convex combination of the 24 vertices meets the equalities.

    Notes
    -----
    Zero constraints on sign-definite rows are applied by dropping vertices.
    With a single remaining equality the program is solved exactly by
    enumerating its basic solutions; otherwise HiGHS is used.
    """
    obj = np.asarray(objective, dtype=float)
    vals = _lp(np.atleast_2d(obj), constraints, maximize)
    return float(vals[0]) if obj.ndim == 1 else vals


def ns_lp_highs(objective, constraints=None, maximize: bool = True) -> float:
    """:func:`ns_lp` for one objective, always through HiGHS (reference path)."""
    V = catalog().matrix().T
    rows, rhs = _constraint_rows(constraints)
    A_eq = np.vstack([rows @ V, np.ones((1, V.shape[1]))])
    b_eq = np.concatenate([rhs, [1.0]])
    return _lp_highs(np.asarray(objective, dtype=float) @ V, A_eq, b_eq, maximize)


def witness_domain(kind: WitnessKind | str, level: Level | str) -> tuple[float, float]:
    """Interval of nonlocal witness values reachable at ``level``."""
    kind = WitnessKind.parse(kind)
    level = Level.parse(level)
    lo = 2.0 if kind is WitnessKind.CHSH else 0.0
    return lo, relaxation_maximum(kind, level)


@functools.lru_cache(maxsize=None)
def relaxation_maximum(kind: WitnessKind, level: Level) -> float:
    """Largest witness value compatible with the relaxation (zeros imposed for Hardy/CL)."""
    kind = WitnessKind.parse(kind)
    level = Level.parse(level)
    if level is Level.L0:
        return 4.0 if kind is WitnessKind.CHSH else 0.5
    if kind is WitnessKind.CHSH:
        return 2 * math.sqrt(2)
    cons = witness_constraints(WitnessSpec(kind, 0.0))
    mm = moment_matrix(level)
    funcs = _prob_functionals(mm)
    obj = _row_functional(funcs, cons.value_row)
    # drop the value row, keep the zeros
    zeros = WitnessConstraints(np.zeros(16), 0.0, cons.zeros)
    sol = solve_sdp(build_problem(mm, obj, zeros))
    if not sol.optimal:
        raise RuntimeError(f"witness maximum did not converge ({sol.status.value})")
    return float(sol.value)


def _check_range(w: WitnessSpec) -> None:
    lo, hi = (-4.0, 4.0) if w.kind is WitnessKind.CHSH else (0.0, 0.5)
    if not lo <= w.value <= hi:
        raise ValueError(f"{w.kind.value} value {w.value} outside [{lo}, {hi}]")


def _reduce_cells(values, gaps, statuses, w, level) -> DiResult:
    values = np.asarray(values, dtype=float)
    best = float(values.max())
    k = int(np.flatnonzero(values >= best - TIE_TOL)[0])
    x, rest = divmod(k, 8)
    y, rest = divmod(rest, 4)
    ia, ib = divmod(rest, 2)
    status = SdpStatus.MAX_ITER if SdpStatus.MAX_ITER in statuses else SdpStatus.OPTIMAL
    return DiResult(
        witness=w,
        level=level,
        p_star=min(1.0, best),
        cell=(x, y, OUTCOMES[ia], OUTCOMES[ib]),
        duality_gap=float(max(gaps)),
        status=status,
        cell_values=tuple(float(v) for v in values),
    )


def di_guaranteed(
    witness: WitnessSpec, level: Level | str = Level.L1AB, options: SolverOptions | None = None
) -> DiResult:
    """Guaranteed min-entropy for a witness reading.

    Parameters
    ----------
    witness : WitnessSpec
        Hardy and CL readings also fix their zero probabilities.
    level : {"L0", "L1", "L1ab"}
        Relaxation of the quantum set.
    options : SolverOptions, optional
        Interior-point settings (ignored at L0).

    Returns
    -------
    DiResult
        ``bits`` holds ``-log2 p*``.

    Raises
    ------
    InfeasibleWitnessError
        When the reading is not reachable at ``level``.
    """
    level = Level.parse(level)
    _check_range(witness)
    cons = witness_constraints(witness)
    eye = np.eye(16)
    if level is Level.L0:
        vals = list(ns_lp(eye, cons))
        return _reduce_cells(vals, [0.0], [SdpStatus.OPTIMAL], witness, level)
    mm = moment_matrix(level)
    funcs = _prob_functionals(mm)
    vals, gaps, statuses = [], [], []
    for k in range(16):
        sol = solve_sdp(build_problem(mm, funcs[k], cons), options)
        if sol.status is SdpStatus.INFEASIBLE:
            raise InfeasibleWitnessError(
                f"{witness.kind.value} = {witness.value} is not reachable at level {level.value}"
            )
        vals.append(sol.value)
        gaps.append(sol.duality_gap)
        statuses.append(sol.status)
    return _reduce_cells(vals, gaps, statuses, witness, level)


def di_curve(
    kind: WitnessKind | str,
    level: Level | str,
    values=None,
    points: int = CURVE_POINTS,
    options: SolverOptions | None = None,
) -> list[DiResult]:
    """Bounds on a uniform grid over the nonlocal part of the witness domain."""
    kind = WitnessKind.parse(kind)
    level = Level.parse(level)
    if values is None:
        lo, hi = witness_domain(kind, level)
        values = np.linspace(lo, hi, points)
    return [di_guaranteed(WitnessSpec(kind, float(v)), level, options) for v in values]


def write_curve_csv(results, out=None) -> str:
    """Columns ``witness_value, bits, level, argmax_cell, duality_gap``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["witness_value", "bits", "level", "argmax_cell", "duality_gap"])
    for r in results:
        w.writerow([f"{r.witness.value:.10g}", f"{r.bits:.10g}", r.level.value, r.cell_label, f"{r.duality_gap:.3g}"])
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text


def _membership_problem(behavior: Behavior, level: Level) -> SdpProblem:
    mm = moment_matrix(level)
    c = behavior.correlators()
    rows, rhs = [], []
    for (wa, wb), val in (
        [(((x,), ()), c.ax[x]) for x in (0, 1)]
        + [(((), (y,)), c.by[y]) for y in (0, 1)]
        + [(((x,), (y,)), c.axby[x][y]) for x in (0, 1) for y in (0, 1)]
    ):
        r = np.zeros(mm.nvars)
        r[mm.var(wa, wb)] = 1.0
        rows.append(r)
        rhs.append(val)
    G0, G = mm.basis_matrices()
    return SdpProblem(
        objective=np.zeros(mm.nvars),
        lmi_const=G0,
        lmi_coeffs=G,
        eq_matrix=np.array(rows),
        eq_rhs=np.array(rhs),
    )


def relaxation_margin(behavior: Behavior, level: Level | str = Level.L1AB) -> float:
    """Largest smallest eigenvalue of a moment matrix matching ``behavior``.

    Negative values measure how far the behavior lies outside the relaxation.
    """
    level = Level.parse(level)
    if level is Level.L0:
        return 0.0
    return lmi_margin(_membership_problem(behavior, level))
