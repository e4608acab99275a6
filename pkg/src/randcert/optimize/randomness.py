"""Device-dependent randomness over two-qubit pure states and projective measurements.

The nine parameters are the eight Bloch angles and the state amplitude, in
the order used by :mod:`randcert.quantum`.
"""

from __future__ import annotations

import math

import numpy as np

from ..behavior import WitnessKind, WitnessSpec, flat_index
from ..quantum import outcome_amplitude, probabilities, probabilities_and_jacobian
from .auglag import CONSTRAINT_TOL, AugLagOptions, Constraint, OptOutcome, multistart_driver, slsqp_polish

__all__ = [
    "PARAM_NAMES",
    "PARAM_LOWER",
    "PARAM_UPPER",
    "DEFAULT_SEED",
    "DEFAULT_STARTS",
    "witness_rows",
    "maximize_witness",
    "max_dd_randomness",
]

PARAM_NAMES = ("theta_x1", "theta_x2", "theta_y1", "theta_y2", "phi_x1", "phi_x2", "phi_y1", "phi_y2", "alpha")
PARAM_LOWER = np.zeros(9)
PARAM_UPPER = np.array([math.pi] * 4 + [2 * math.pi] * 4 + [1.0])
DEFAULT_SEED = 20240607
DEFAULT_STARTS = {WitnessKind.HARDY: 100, WitnessKind.CL: 200, WitnessKind.CHSH: 50}

_P1 = flat_index(0, 0, 1, 1)
_ZERO_SETTINGS = ((1, 0, -1, 1), (0, 1, 1, -1), (1, 1, 1, 1))
_HARDY_ZERO_CELLS = tuple(flat_index(*c) for c in _ZERO_SETTINGS)


def witness_rows(kind: WitnessKind | str) -> tuple[np.ndarray, np.ndarray]:
    """``(value_row, zero_rows)``: the witness is ``value_row @ P``, the zeros ``zero_rows @ P``."""
    kind = WitnessKind.parse(kind)
    row = np.zeros(16)
    if kind is WitnessKind.CHSH:
        for x in (0, 1):
            for y in (0, 1):
                sgn = -1.0 if (x, y) == (1, 1) else 1.0
                for a in (1, -1):
                    for b in (1, -1):
                        row[flat_index(x, y, a, b)] = sgn * a * b
        return row, np.zeros((0, 16))
    row[_P1] = 1.0
    cells = _HARDY_ZERO_CELLS if kind is WitnessKind.HARDY else _HARDY_ZERO_CELLS[:2]
    if kind is WitnessKind.CL:
        row[_HARDY_ZERO_CELLS[2]] = -1.0
    zeros = np.zeros((len(cells), 16))
    for i, c in enumerate(cells):
        zeros[i, c] = 1.0
    return row, zeros


class _Model:
    """Probabilities and Jacobian, cached for the most recent parameter vector."""

    def __init__(self, sign: int):
        self.sign = sign
        self._key = None
        self._val = None

    def __call__(self, p):
        key = p.tobytes()
        if key != self._key:
            self._val = probabilities_and_jacobian(p, self.sign)
            self._key = key
        return self._val


def _linear(rows: np.ndarray, model: _Model, rhs=None, nextra: int = 0) -> Constraint:
    rows = np.atleast_2d(rows)
    rhs = np.zeros(rows.shape[0]) if rhs is None else np.atleast_1d(rhs)

    def fun(z):
        P, Jp = model(np.ascontiguousarray(z[:9]))
        v = rows @ P - rhs
        J = rows @ Jp
        if nextra:
            J = np.hstack([J, np.zeros((J.shape[0], nextra))])
        return v, J

    return Constraint(fun, "eq")


def _zero_cells(kind: WitnessKind) -> tuple[tuple[int, int, int, int], ...]:
    if kind is WitnessKind.HARDY:
        return _ZERO_SETTINGS
    if kind is WitnessKind.CL:
        return _ZERO_SETTINGS[:2]
    return ()


def _amplitudes(cells, sign: int, nextra: int = 0) -> Constraint:
    """Zero probabilities as vanishing real and imaginary amplitude parts.

    The probability itself has zero gradient on its zero set, which stalls the
    multiplier method; the amplitude form keeps the constraints regular.
    """

    def fun(z):
        p = np.ascontiguousarray(z[:9])
        vals = np.empty(2 * len(cells))
        J = np.zeros((2 * len(cells), 9 + nextra))
        for i, c in enumerate(cells):
            amp, g = outcome_amplitude(p, *c, sign=sign)
            vals[2 * i], vals[2 * i + 1] = amp.real, amp.imag
            J[2 * i, :9], J[2 * i + 1, :9] = g.real, g.imag
        return vals, J

    return Constraint(fun, "eq")


def _prob_residuals(params, sign, row, zeros, target=None) -> np.ndarray:
    """Constraint residuals in probability units."""
    P = probabilities(params, sign)
    r = zeros @ P
    if target is not None:
        r = np.concatenate([[row @ P - target], r])
    return r


def _box(alpha):
    lo, hi = PARAM_LOWER.copy(), PARAM_UPPER.copy()
    if alpha is not None:
        lo[8] = hi[8] = float(alpha)
    return lo, hi


def maximize_witness(
    kind: WitnessKind | str,
    starts: int | None = None,
    seed: int = DEFAULT_SEED,
    alpha: float | None = None,
    sign: int = -1,
    options: AugLagOptions | None = None,
) -> OptOutcome:
    """Largest witness value over settings (and the state unless ``alpha`` is given).

    Hardy and CL maxima keep their zero probabilities as equality constraints.
    ``best_value`` is the maximised witness value.
    """
    kind = WitnessKind.parse(kind)
    starts = DEFAULT_STARTS[kind] if starts is None else starts
    row, zeros = witness_rows(kind)
    model = _Model(sign)

    def obj(p):
        P, J = model(p)
        return -float(row @ P), -(row @ J)

    # the probability form locates the basins; the amplitude form is regular at the optimum
    cons = [_linear(zeros, model)] if zeros.size else []
    out = multistart_driver(obj, cons, _box(alpha), starts, seed, options=options)
    cells = _zero_cells(kind)
    if cells:
        out = _polish(out, obj, [_amplitudes(cells, sign)], _box(alpha))
    out = _replace_value(out, -out.best_value, kind=kind.value, sign=sign)
    return _with_residuals(out, _prob_residuals(out.params, sign, row, zeros))


def _polish(out: OptOutcome, obj, cons, box) -> OptOutcome:
    lo, hi = box
    free = hi > lo

    def f_red(z):
        x = lo.copy()
        x[free] = z
        v, g = obj(x)
        return v, g[free]

    def wrap(c):
        def fun(z):
            x = lo.copy()
            x[free] = z
            v, J = c.fun(x)
            return v, J[:, free]

        return Constraint(fun, c.kind)

    bounds = list(zip(lo[free], hi[free]))
    polished = []
    for r in out.local_optima:
        p = slsqp_polish(f_red, [wrap(c) for c in cons], r.x[free], bounds, r.start_index)
        x = lo.copy()
        x[free] = p.x
        polished.append(type(p)(x, p.value, p.residuals, p.converged, p.start_index, p.outer_iterations))
    feasible = [r for r in polished if r.max_residual <= CONSTRAINT_TOL]
    if not feasible:
        return out
    best = min(feasible, key=lambda r: (r.value, r.start_index))
    return OptOutcome(
        best_value=best.value,
        params=best.x,
        constraint_residuals=best.residuals,
        starts_used=out.starts_used,
        converged=True,
        local_optima=tuple(polished),
        extra=out.extra,
    )


def _with_residuals(out: OptOutcome, res: np.ndarray) -> OptOutcome:
    return OptOutcome(
        best_value=out.best_value,
        params=out.params,
        constraint_residuals=res,
        starts_used=out.starts_used,
        converged=out.converged,
        local_optima=out.local_optima,
        extra=out.extra,
    )


def _replace_value(out: OptOutcome, value: float, **extra) -> OptOutcome:
    return OptOutcome(
        best_value=value,
        params=out.params,
        constraint_residuals=out.constraint_residuals,
        starts_used=out.starts_used,
        converged=out.converged,
        local_optima=out.local_optima,
        extra={**out.extra, **extra},
    )


def max_dd_randomness(
    witness: WitnessSpec,
    starts: int | None = None,
    seed: int = DEFAULT_SEED,
    sign: int = -1,
    alpha: float | None = None,
    options: AugLagOptions | None = None,
) -> OptOutcome:
    """Maximum min-entropy at a fixed witness value.

    For every setting pair ``(x, y)`` the largest of its four probabilities is
    minimised through an epigraph variable ``s``; the pair with the smallest
    ``s`` gives ``best_value = -log2 s`` in bits.

    Returns
    -------
    OptOutcome
        ``params`` holds the eight angles and ``alpha``; ``extra["pair"]`` the
        0-based setting pair and ``extra["witness_value"]`` the achieved reading.
    """
    kind = witness.kind
    if kind is WitnessKind.CHSH:
        raise ValueError("device-dependent maximisation is defined for Hardy and CL readings")
    starts = DEFAULT_STARTS[kind] if starts is None else starts
    row, zeros = witness_rows(kind)
    model = _Model(sign)
    eq = _linear(row, model, witness.value, nextra=1)
    amps = _amplitudes(_zero_cells(kind), sign, nextra=1)
    lo, hi = _box(alpha)
    lo = np.append(lo, 0.25)
    hi = np.append(hi, 1.0)

    def obj(z):
        g = np.zeros(10)
        g[9] = 1.0
        return float(z[9]), g

    best = None
    for x in (0, 1):
        for y in (0, 1):
            cells = [flat_index(x, y, a, b) for a in (1, -1) for b in (1, -1)]

            def ineq(z, cells=cells):
                P, Jp = model(np.ascontiguousarray(z[:9]))
                return P[cells] - z[9], np.hstack([Jp[cells], -np.ones((4, 1))])

            out = multistart_driver(obj, [eq, amps, Constraint(ineq, "ineq")], (lo, hi), starts, seed, options=options)
            key = (not out.converged, out.best_value)
            if best is None or key < best[0]:
                best = (key, out, (x, y))
    _, out, pair = best
    params = out.params[:9]
    probs = probabilities(params, sign)
    return OptOutcome(
        best_value=-math.log2(out.best_value),
        params=params,
        constraint_residuals=_prob_residuals(params, sign, row, zeros, witness.value),
        starts_used=out.starts_used * 4,
        converged=out.converged,
        local_optima=out.local_optima,
        extra={
            "pair": pair,
            "sign": sign,
            "witness_value": float(row @ probs),
            "guess": float(out.best_value),
        },
    )
