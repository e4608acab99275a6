"""Extremality test for 2-2-2 quantum correlators and extremal scans over NS faces.

The test rescales each correlator by quantities built from the marginals and
checks the Tsirelson-Landau-Masanes type equality on the rescaled values,
together with a sign condition on the four cells.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from ..behavior import (
    Behavior,
    CorrelatorSet,
    WitnessKind,
    flat_index,
    guessing_probability,
    min_entropy,
    witness_value,
)
from ..quantum import probabilities
from ..vertices import CL_LD, HARDY_LD, local_deterministic, pr_box
from .auglag import CONSTRAINT_TOL, Constraint, slsqp_polish, sobol_starts
from .randomness import PARAM_LOWER, PARAM_NAMES, PARAM_UPPER, _amplitudes, _Model, _zero_cells, witness_rows

__all__ = [
    "ExtremalityReport",
    "ScanPoint",
    "extremality_check",
    "extremal_scan",
    "scan_vertices",
    "face_weights",
    "write_scan_csv",
    "EXTREMALITY_TOL",
]

EXTREMALITY_TOL = 1e-4
# smallest-eigenvalue slack for membership of an NPA relaxation
MARGIN_TOL = 1e-6
# smaller witness values are treated as local points
MIN_WITNESS = 1e-6


@dataclass(frozen=True)
class ExtremalityReport:
    """Outcome of :func:`extremality_check`.

    ``passes`` is ``None`` when a normalisation ``d`` is not positive, i.e. the
    point lies outside the criterion's domain (deterministic or PR-like).
    """

    equality_residual: float
    product_value: float
    passes: bool | None
    s: np.ndarray
    scaled: np.ndarray

    @property
    def degenerate(self) -> bool:
        return self.passes is None


def _scaled(c: CorrelatorSet):
    C = np.asarray(c.axby, dtype=float)
    cx = np.asarray(c.ax, dtype=float)
    cy = np.asarray(c.by, dtype=float)
    q = C**2 - cx[:, None] ** 2 - cy[None, :] ** 2 + 1
    S = 0.5 * (q + np.sqrt(np.clip(q * q - 4 * (C - np.outer(cx, cy)) ** 2, 0.0, None)))
    r = np.sqrt(np.clip(S, 0.0, None))
    dx = (cx[:, None] ** 2 + S + r) / (1 + r)
    dy = (cy[None, :] ** 2 + S + r) / (1 + r)
    return C, cx, cy, S, dx, dy


def _residual(C, cx, cy, S, dx, dy):
    with np.errstate(divide="ignore", invalid="ignore"):
        Cb = np.clip(C / np.sqrt(dx * dy), -1.0, 1.0)

    def root(u, v):
        return math.sqrt(max(0.0, (1 - u * u) * (1 - v * v)))

    eq = Cb[0, 0] * Cb[0, 1] - Cb[1, 0] * Cb[1, 1] - root(Cb[0, 0], Cb[0, 1]) - root(Cb[1, 0], Cb[1, 1])
    prod = float(np.prod((1 - S) * C - np.outer(cx, cy)))
    return float(eq), prod, Cb


def extremality_check(c: CorrelatorSet, tol_eq: float = EXTREMALITY_TOL) -> ExtremalityReport:
    """Test whether correlators are an extremal point of the quantum set.

    Parameters
    ----------
    c : CorrelatorSet
        Correlators in the CHSH orientation (minus sign on ``X2 Y2``).
    tol_eq : float
        Tolerance on the equality residual and on the product condition.

    Returns
    -------
    ExtremalityReport
        ``passes`` is ``|equality_residual| <= tol_eq and product_value >= -tol_eq``.
    """
    C, cx, cy, S, dx, dy = _scaled(c)
    eq, prod, Cb = _residual(C, cx, cy, S, dx, dy)
    if np.any(dx <= tol_eq) or np.any(dy <= tol_eq):
        return ExtremalityReport(eq, prod, None, S, Cb)
    passes = abs(eq) <= tol_eq and prod >= -tol_eq
    return ExtremalityReport(eq, prod, bool(passes), S, Cb)


@dataclass(frozen=True)
class ScanPoint:
    witness_value: float
    r_max_bits: float
    r_guaranteed_bits: float
    weights: np.ndarray
    equality_residual: float
    pair: tuple[int, int] = (0, 0)
    params: np.ndarray | None = None

    def as_tuple(self) -> tuple[float, float, float]:
        return self.witness_value, self.r_max_bits, self.r_guaranteed_bits


def scan_vertices(kind: WitnessKind | str) -> tuple[Behavior, ...]:
    """PR-Box 1 followed by the LD points sharing the witness zeros."""
    kind = WitnessKind.parse(kind)
    if kind is WitnessKind.HARDY:
        lds = HARDY_LD
    elif kind is WitnessKind.CL:
        lds = CL_LD
    else:
        raise ValueError("extremal scans are defined for Hardy and CL")
    return (pr_box(1),) + tuple(local_deterministic(n) for n in lds)


def face_weights(P, kind: WitnessKind | str) -> np.ndarray:
    """Nonnegative weights on :func:`scan_vertices` reproducing ``P`` (least squares)."""
    V = np.stack([v.probs for v in scan_vertices(kind)])
    A = np.vstack([V.T, np.ones(len(V))])
    w, _ = nnls(A, np.append(np.asarray(P, dtype=float), 1.0))
    return w / w.sum()


def _project(P0, kind, x0, sign):
    """Quantum behavior on the witness face closest to ``P0`` in squared distance."""
    model = _Model(sign)

    def obj(x):
        P, J = model(x)
        r = P - P0
        return float(r @ r), 2 * (r @ J)

    cons = [_amplitudes(_zero_cells(kind), sign)]
    return slsqp_polish(obj, cons, x0, list(zip(PARAM_LOWER, PARAM_UPPER)), maxiter=100)


def _refine(x0, kind, pair, sign, value=None):
    """Raise the min-entropy at ``pair`` from ``x0``, at fixed witness ``value`` if given."""
    cells = [flat_index(*pair, a, b) for a in (1, -1) for b in (1, -1)]
    model = _Model(sign)
    row = witness_rows(kind)[0]

    def level_set(z):
        P, J = model(np.ascontiguousarray(z[:9]))
        return np.array([row @ P - value]), np.append(row @ J, 0.0)[None, :]

    grad = np.zeros(10)
    grad[9] = 1.0

    def ineq(z):
        P, J = model(np.ascontiguousarray(z[:9]))
        return P[cells] - z[9], np.hstack([J[cells], -np.ones((4, 1))])

    z0 = np.append(x0, model(x0)[0][cells].max())
    cons = [_amplitudes(_zero_cells(kind), sign, nextra=1), Constraint(ineq, "ineq")]
    if value is not None:
        cons.append(Constraint(level_set))
    bounds = list(zip(PARAM_LOWER, PARAM_UPPER)) + [(0.25, 1.0)]
    return slsqp_polish(lambda z: (float(z[9]), grad), cons, z0, bounds, maxiter=200).x[:9]


def _evaluate(x, kind, sign, tol_eq, level):
    P = probabilities(x, sign)
    b = Behavior(np.clip(P, 0.0, 1.0))
    zeros = witness_rows(kind)[1] @ b.probs
    if np.any(np.abs(zeros) > CONSTRAINT_TOL):
        return None
    rep = extremality_check(b.correlators(), tol_eq)
    if not rep.passes:
        return None
    value = witness_value(b, kind).value
    if value <= MIN_WITNESS:
        return None
    if level is not None:
        from ..sdp.guaranteed import relaxation_margin

        if relaxation_margin(b, level) < -MARGIN_TOL:
            return None
    r_max, pair = max((min_entropy(b, i, j), (i, j)) for i in (0, 1) for j in (0, 1))
    guess = guessing_probability(b)[0]
    return ScanPoint(
        float(value), float(r_max), float(-math.log2(guess)), face_weights(b.probs, kind),
        rep.equality_residual, pair, np.asarray(x, dtype=float),
    )


def _bin_leaders(points, bins: int):
    """Highest-randomness point in each of ``bins`` equal witness-value intervals."""
    if bins <= 0 or not points:
        return []
    top = max(p.witness_value for p in points)
    leaders = {}
    for p in points:
        k = min(bins - 1, int(bins * p.witness_value / top))
        if k not in leaders or p.r_max_bits > leaders[k].r_max_bits:
            leaders[k] = p
    return [leaders[k] for k in sorted(leaders)]


def extremal_scan(
    witness_kind: WitnessKind | str,
    samples: int = 500,
    seed: int = 0,
    tol_eq: float = EXTREMALITY_TOL,
    level=None,
    refine: int = 20,
    sign: int = -1,
) -> list[ScanPoint]:
    """Extremal quantum points on the face of the NS polytope fixed by the witness zeros.

    Each sample is a flat Dirichlet weight vector over :func:`scan_vertices`.
    Its mixture is replaced by the nearest behavior of a pure two-qubit state
    under projective measurements that keeps the witness zeros, and
    survivors of :func:`extremality_check` are recorded.  The best survivor in
    each witness-value bin is then moved along the quantum face to raise its
    min-entropy, once at fixed witness value and once freely, and re-tested.

    Parameters
    ----------
    witness_kind : {"Hardy", "CL"}
    samples : int
        Number of Dirichlet draws.
    seed : int
        Seeds both the weight draws and the parameter starts.
    tol_eq : float
        Tolerance handed to :func:`extremality_check`.
    level : {"L1", "L1ab"}, optional
        Additionally require membership of this NPA relaxation.
    refine : int
        Number of witness-value bins; the best survivor of each is refined at
        its witness value.

    Returns
    -------
    list of ScanPoint
        Sorted by witness value.  ``r_max_bits`` is the min-entropy at the best
        setting pair and ``r_guaranteed_bits`` is ``-log2`` of the guessing
        probability over all pairs.
    """
    kind = WitnessKind.parse(witness_kind)
    if samples < 1:
        raise ValueError("samples must be positive")
    V = np.stack([v.probs for v in scan_vertices(kind)])
    rng = np.random.default_rng(seed)
    draws = rng.dirichlet(np.ones(len(V)), size=samples)
    starts = sobol_starts(PARAM_LOWER, PARAM_UPPER, samples, seed)
    out = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for w0, x0 in zip(draws, starts):
            pt = _evaluate(_project(w0 @ V, kind, x0, sign).x, kind, sign, tol_eq, level)
            if pt is not None:
                out.append(pt)
        for p in _bin_leaders(out, refine):
            for value in (p.witness_value, None):
                pt = _evaluate(_refine(p.params, kind, p.pair, sign, value), kind, sign, tol_eq, level)
                if pt is not None:
                    out.append(pt)
    out.sort(key=lambda p: (p.witness_value, p.r_max_bits))
    return out


def write_scan_csv(points, kind: WitnessKind | str, out=None) -> str:
    """Columns ``witness_value, r_max_bits, r_guaranteed_bits``, face weights, state parameters, ``residual_max``."""
    n = len(scan_vertices(kind))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(
        ["witness_value", "r_max_bits", "r_guaranteed_bits"] + [f"w{i}" for i in range(n)] + list(PARAM_NAMES) + ["residual_max"]
    )
    for p in points:
        params = p.params if p.params is not None else np.full(9, np.nan)
        w.writerow(
            [f"{p.witness_value:.10g}", f"{p.r_max_bits:.10g}", f"{p.r_guaranteed_bits:.10g}"]
            + [f"{x:.10g}" for x in p.weights]
            + [f"{x:.10g}" for x in params]
            + [f"{abs(p.equality_residual):.3g}"]
        )
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text
