"""NPA moment matrices for the 2-2-2 scenario and the guessing-probability programs.

Monomials are pairs ``(wa, wb)`` of setting words for each party.  Products
reduce with ``A_x^2 = B_y^2 = 1`` and ``[A_x, B_y] = 0``; since moments are
taken real, a word and its reverse share one variable.

A witness that pins a probability to zero forces ``v' G v = 0`` for a vector
``v`` in the monomial span at level 1+AB, hence ``G v = 0``.  These are added
as linear equalities and the PSD constraint is restricted to the orthogonal
complement of the ``v``'s, which gives the interior-point method a strictly
feasible problem.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg as sla

from ..behavior import OUTCOMES, WitnessKind, WitnessSpec, flat_index, outcome_index
from .solver import SdpProblem, SdpSolution, SdpStatus, SolverOptions, solve_sdp

__all__ = [
    "Level",
    "LinearFunctional",
    "MomentMatrix",
    "moment_matrix",
    "probability_functional",
    "chsh_functional",
    "witness_constraints",
    "build_problem",
    "moments_from_behavior",
]

Word = tuple[tuple[int, ...], tuple[int, ...]]


class Level(str, Enum):
    L0 = "L0"
    L1 = "L1"
    L1AB = "L1ab"

    @classmethod
    def parse(cls, text) -> "Level":
        if isinstance(text, cls):
            return text
        for member in cls:
            if member.value.lower() == str(text).lower().replace("+", ""):
                return member
        raise ValueError(f"unknown level {text!r}; expected one of L0, L1, L1ab")


def _reduce(word: tuple[int, ...]) -> tuple[int, ...]:
    out: list[int] = []
    for op in word:
        if out and out[-1] == op:
            out.pop()
        else:
            out.append(op)
    return tuple(out)


def canonical_word(wa, wb) -> Word:
    a, b = _reduce(tuple(wa)), _reduce(tuple(wb))
    return min((a, b), (a[::-1], b[::-1]))


IDENTITY: Word = ((), ())


@dataclass(frozen=True)
class LinearFunctional:
    """``coeffs @ y + const`` over the free moment variables."""

    coeffs: np.ndarray
    const: float = 0.0

    def __call__(self, y) -> float:
        return float(self.coeffs @ np.asarray(y, dtype=float) + self.const)

    def __add__(self, other: "LinearFunctional") -> "LinearFunctional":
        return LinearFunctional(self.coeffs + other.coeffs, self.const + other.const)

    def __sub__(self, other: "LinearFunctional") -> "LinearFunctional":
        return LinearFunctional(self.coeffs - other.coeffs, self.const - other.const)

    def __mul__(self, k: float) -> "LinearFunctional":
        return LinearFunctional(self.coeffs * k, self.const * k)

    __rmul__ = __mul__


@dataclass(frozen=True)
class MomentMatrix:
    """Index bookkeeping for one hierarchy level.

    ``var_index[i, j]`` is the free variable behind cell ``(i, j)``, or ``-1``
    when the cell reduces to the identity (moment 1).
    """

    level: Level
    monomials: tuple[Word, ...]
    words: tuple[Word, ...]
    var_index: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.monomials)

    @property
    def nvars(self) -> int:
        return len(self.words)

    def var(self, wa, wb) -> int:
        w = canonical_word(wa, wb)
        if w == IDENTITY:
            raise KeyError("the identity moment is the constant 1")
        return self.words.index(w)

    def entry(self, wa, wb) -> LinearFunctional:
        """Moment ``<wa wb>`` as a functional."""
        c = np.zeros(self.nvars)
        if canonical_word(wa, wb) == IDENTITY:
            return LinearFunctional(c, 1.0)
        c[self.var(wa, wb)] = 1.0
        return LinearFunctional(c, 0.0)

    def gamma(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        ext = np.append(y, 1.0)
        return ext[self.var_index]

    def basis_matrices(self) -> tuple[np.ndarray, np.ndarray]:
        """``(G0, G)`` with ``gamma(y) = G0 + sum_k y_k G[k]``."""
        n = self.size
        G0 = (self.var_index == -1).astype(float)
        G = np.zeros((self.nvars, n, n))
        for (i, j), k in np.ndenumerate(self.var_index):
            if k >= 0:
                G[k, i, j] = 1.0
        return G0, G

    def cell_vector(self, a: int, b: int, x: int, y: int) -> np.ndarray | None:
        """Vector ``v`` with ``v' G v = 16 P(a, b | x, y)``, if it lies in the span."""
        want = {IDENTITY: 1.0, ((x,), ()): a, ((), (y,)): b, ((x,), (y,)): a * b}
        if ((x,), (y,)) not in self.monomials:
            return None
        v = np.zeros(self.size)
        for i, m in enumerate(self.monomials):
            v[i] = want.get(m, 0.0)
        return v


def _monomials(level: Level) -> tuple[Word, ...]:
    mons: list[Word] = [IDENTITY]
    mons += [((x,), ()) for x in (0, 1)]
    mons += [((), (y,)) for y in (0, 1)]
    if level is Level.L1AB:
        mons += [((x,), (y,)) for x in (0, 1) for y in (0, 1)]
    return tuple(mons)


def moment_matrix(level: Level | str) -> MomentMatrix:
    level = Level.parse(level)
    if level is Level.L0:
        raise ValueError("level L0 has no moment matrix; it is solved as a linear program")
    mons = _monomials(level)
    n = len(mons)
    words: list[Word] = []
    # keep first-order and correlator moments at the front in a fixed order
    for w in [((x,), ()) for x in (0, 1)] + [((), (y,)) for y in (0, 1)] + [
        ((x,), (y,)) for x in (0, 1) for y in (0, 1)
    ]:
        words.append(canonical_word(*w))
    idx = np.empty((n, n), dtype=int)
    for i, (ai, bi) in enumerate(mons):
        for j, (aj, bj) in enumerate(mons):
            w = canonical_word(ai[::-1] + aj, bi[::-1] + bj)
            if w == IDENTITY:
                idx[i, j] = -1
                continue
            if w not in words:
                words.append(w)
            idx[i, j] = words.index(w)
    idx.setflags(write=False)
    return MomentMatrix(level=level, monomials=mons, words=tuple(words), var_index=idx)


def probability_functional(mm: MomentMatrix, a: int, b: int, x: int, y: int) -> LinearFunctional:
    """``(1 + a <A_x> + b <B_y> + a b <A_x B_y>) / 4`` (settings 0-based)."""
    return 0.25 * (
        mm.entry((), ())
        + a * mm.entry((x,), ())
        + b * mm.entry((), (y,))
        + (a * b) * mm.entry((x,), (y,))
    )


def chsh_functional(mm: MomentMatrix) -> LinearFunctional:
    c = [mm.entry((x,), (y,)) for x in (0, 1) for y in (0, 1)]
    return c[0] + c[1] + c[2] - c[3]


@dataclass(frozen=True)
class WitnessConstraints:
    """Linear witness data in probability space.

    ``value_row @ P = value`` and ``P[cell] = 0`` for every cell in ``zeros``.
    """

    value_row: np.ndarray
    value: float
    zeros: tuple[tuple[int, int, int, int], ...]

    def rows(self) -> tuple[np.ndarray, np.ndarray]:
        rows = [self.value_row]
        rhs = [self.value]
        for a, b, x, y in self.zeros:
            r = np.zeros(16)
            r[flat_index(x, y, a, b)] = 1.0
            rows.append(r)
            rhs.append(0.0)
        return np.array(rows), np.array(rhs)


# zero cells as (a, b, x, y), settings 0-based
_HARDY_ZEROS = ((-1, 1, 1, 0), (1, -1, 0, 1), (1, 1, 1, 1))
_CL_ZEROS = ((-1, 1, 1, 0), (1, -1, 0, 1))


def witness_constraints(w: WitnessSpec) -> WitnessConstraints:
    row = np.zeros(16)
    if w.kind is WitnessKind.CHSH:
        for x, y in itertools.product((0, 1), repeat=2):
            sgn = -1.0 if (x, y) == (1, 1) else 1.0
            for a, b in itertools.product(OUTCOMES, repeat=2):
                row[flat_index(x, y, a, b)] += sgn * a * b
        return WitnessConstraints(row, w.value, ())
    row[flat_index(0, 0, 1, 1)] = 1.0
    if w.kind is WitnessKind.HARDY:
        return WitnessConstraints(row, w.value, _HARDY_ZEROS)
    row[flat_index(1, 1, 1, 1)] = -1.0
    return WitnessConstraints(row, w.value, _CL_ZEROS)


def _prob_functionals(mm: MomentMatrix) -> list[LinearFunctional]:
    out: list[LinearFunctional | None] = [None] * 16
    for x, y, a, b in itertools.product((0, 1), (0, 1), OUTCOMES, OUTCOMES):
        out[flat_index(x, y, a, b)] = probability_functional(mm, a, b, x, y)
    return out  # type: ignore[return-value]


def _row_functional(funcs: list[LinearFunctional], row: np.ndarray) -> LinearFunctional:
    acc = LinearFunctional(np.zeros_like(funcs[0].coeffs), 0.0)
    for k in np.flatnonzero(row):
        acc = acc + row[k] * funcs[k]
    return acc


def build_problem(
    mm: MomentMatrix,
    objective: LinearFunctional,
    constraints: WitnessConstraints | None = None,
    maximize: bool = True,
    positivity: bool = True,
    facial_reduction: bool = True,
) -> SdpProblem:
    """Assemble the block LMI: reduced moment matrix plus 16 scalar positivity blocks."""
    funcs = _prob_functionals(mm)
    eq_rows: list[np.ndarray] = []
    eq_rhs: list[float] = []
    G0, G = mm.basis_matrices()
    Q = np.eye(mm.size)
    if constraints is not None:
        rows, rhs = constraints.rows()
        for r, v in zip(rows, rhs):
            f = _row_functional(funcs, r)
            eq_rows.append(f.coeffs)
            eq_rhs.append(v - f.const)
        vecs = [mm.cell_vector(*z) for z in constraints.zeros]
        vecs = [v for v in vecs if v is not None]
        if facial_reduction and vecs:
            V = np.column_stack(vecs)
            # G(y) V = 0, written row by row
            GV0 = G0 @ V
            GV = G @ V  # (nvars, n, k)
            for i in range(mm.size):
                for c in range(V.shape[1]):
                    eq_rows.append(GV[:, i, c])
                    eq_rhs.append(-GV0[i, c])
            Q = sla.null_space(V.T)
    blocks0 = [Q.T @ G0 @ Q]
    blocks = [np.einsum("ji,kjl,lm->kim", Q, G, Q)]
    # at 1+AB every probability is a quadratic form of G, so positivity is implied
    # and the redundant blocks would only degrade the conditioning
    if positivity and mm.level is Level.L1:
        blocks0.append(np.diag([f.const for f in funcs]))
        blocks.append(np.stack([np.diag([f.coeffs[k] for f in funcs]) for k in range(mm.nvars)]))
    F0 = sla.block_diag(*blocks0)
    F = np.stack([sla.block_diag(*[bk[k] for bk in blocks]) for k in range(mm.nvars)])
    return SdpProblem(
        objective=objective.coeffs,
        objective_const=objective.const,
        lmi_const=F0,
        lmi_coeffs=F,
        eq_matrix=np.array(eq_rows).reshape(-1, mm.nvars) if eq_rows else None,
        eq_rhs=np.array(eq_rhs) if eq_rows else None,
        maximize=maximize,
    )


def moments_from_behavior(mm: MomentMatrix, correlators) -> np.ndarray:
    """First-order and correlator moments of a behavior; higher words are left at zero."""
    y = np.zeros(mm.nvars)
    for x in (0, 1):
        y[mm.var((x,), ())] = correlators.ax[x]
        for j in (0, 1):
            y[mm.var((x,), (j,))] = correlators.axby[x][j]
    for j in (0, 1):
        y[mm.var((), (j,))] = correlators.by[j]
    return y


def solve_functional(
    level: Level | str,
    objective_row: np.ndarray,
    constraints: WitnessConstraints | None = None,
    maximize: bool = True,
    options: SolverOptions | None = None,
) -> SdpSolution:
    """Optimise ``objective_row @ P`` over the relaxation at ``level`` (L1 or L1ab)."""
    mm = moment_matrix(level)
    obj = _row_functional(_prob_functionals(mm), np.asarray(objective_row, dtype=float))
    return solve_sdp(build_problem(mm, obj, constraints, maximize=maximize), options)


__all__ += ["WitnessConstraints", "solve_functional", "canonical_word", "SdpStatus", "outcome_index"]
