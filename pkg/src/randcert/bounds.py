"""Closed-form guaranteed-randomness bounds.

Each model mixes one extremal behavior with local deterministic points.  With
mixing weight ``q`` the witness is affine in ``q`` and the adversary's guess
is ``1 - q (1 - G_ext)``, so every bound has the shape
``-log2(1 - k * excess)`` for varying preparations, where ``excess`` is the
witness value above its local boundary.  Fixed-preparation models use the
extremal behavior alone.
"""

from __future__ import annotations

import functools
import math
from enum import Enum

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .behavior import CorrelatorSet, WitnessKind, WitnessSpec, guessing_probability, witness_value
from .quantum import HARDY_MAX, SQRT5, correlators_from_params, behavior_from_params

__all__ = [
    "BoundModel",
    "DomainError",
    "guaranteed_bound",
    "bound_domain",
    "case_minimizer",
    "case_coefficient",
    "guessing_from_mixture",
    "max_cl_correlators",
    "max_cl_constants",
    "HARDY_COEFF",
    "CL_GUESS_PRINTED",
    "CL_MAX_PRINTED",
    "CASE3_COEFF_PRINTED",
]

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)
TSIRELSON = 2 * SQRT2

HARDY_COEFF = (3 - SQRT5) / (5 * SQRT5 - 11)
CL_GUESS_PRINTED = 0.6410
CL_MAX_PRINTED = 0.1078
CASE3_COEFF_PRINTED = 0.4924


class DomainError(ValueError):
    """Witness value outside the validity interval of a bound model."""


class BoundModel(str, Enum):
    NS = "NS"
    Q_CASE1_VARYING = "Q_Case1_Varying"
    Q_CASE2_FIXED = "Q_Case2_Fixed"
    Q_CASE2_VARYING = "Q_Case2_Varying"
    Q_CASE3_FIXED = "Q_Case3_Fixed"
    Q_CASE3_VARYING = "Q_Case3_Varying"
    HARDY_CONVEX = "Hardy_Convex"
    CL_CONVEX = "CL_Convex"

    @classmethod
    def parse(cls, text) -> "BoundModel":
        if isinstance(text, cls):
            return text
        for m in cls:
            if m.value.lower() == str(text).lower():
                return m
        raise ValueError(f"unknown bound model {text!r}")

    @property
    def kinds(self) -> tuple[WitnessKind, ...]:
        if self is BoundModel.NS:
            return (WitnessKind.CHSH, WitnessKind.HARDY, WitnessKind.CL)
        if self is BoundModel.HARDY_CONVEX:
            return (WitnessKind.HARDY,)
        if self is BoundModel.CL_CONVEX:
            return (WitnessKind.CL,)
        return (WitnessKind.CHSH,)


# ---------------------------------------------------------------------------
# Case 2 / Case 3 extremal families as functions of their CHSH value


def _case2_guess(b_ext: float) -> float:
    """Guessing probability of the tilted family written in its CHSH value."""
    root = math.sqrt(max(0.0, b_ext * b_ext * (8 - b_ext * b_ext)))
    return 0.25 + 0.125 * (b_ext * b_ext - 4) / math.sqrt(8 - 2 * root)


def _case3_guess(b_ext: float) -> float:
    return (2 + b_ext) / (8 * b_ext) * (2 + math.sqrt(max(0.0, 8 - b_ext * b_ext)))


_GUESS = {"Case2": _case2_guess, "Case3": _case3_guess}
_MODEL_CASE = {BoundModel.Q_CASE2_VARYING: "Case2", BoundModel.Q_CASE3_VARYING: "Case3"}


def _deficit_rate(case: str, b_ext: float) -> float:
    """``(1 - G_ext) / (B_ext - 2)``: guessing loss per unit of CHSH excess."""
    return (1 - _GUESS[case](b_ext)) / (b_ext - 2)


@functools.lru_cache(maxsize=None)
def _case_min(case: str) -> tuple[float, float]:
    f = functools.partial(_deficit_rate, case)
    lo, hi = 2 + 1e-6, TSIRELSON
    grid = np.linspace(lo, hi, 201)[1:-1]
    mid = float(grid[int(np.argmin([f(b) for b in grid]))])
    res = minimize_scalar(f, bracket=(lo, mid, hi), method="golden", tol=1e-10)
    return float(res.x), float(res.fun)


def case_minimizer(model: BoundModel | str) -> float:
    """CHSH value of the extremal behavior that minimises a varying-preparation bound.

    The bound is ``-log2(1 - (B - 2) r(B_ext))`` with ``r`` the guessing loss per
    unit CHSH excess, so the minimiser of ``r`` over ``(2, 2 sqrt 2]`` is
    independent of the observed ``B``.
    """
    model = BoundModel.parse(model)
    if model not in _MODEL_CASE:
        raise ValueError(f"{model.value} is not a varying-preparation case")
    return _case_min(_MODEL_CASE[model])[0]


def case_coefficient(model: BoundModel | str) -> float:
    """Slope ``k`` in ``-log2(1 - k (B - 2))`` at the minimising extremal behavior."""
    model = BoundModel.parse(model)
    if model not in _MODEL_CASE:
        raise ValueError(f"{model.value} is not a varying-preparation case")
    return _case_min(_MODEL_CASE[model])[1]


def case_objective(model: BoundModel | str, b_obs: float, b_ext: float) -> float:
    """Varying-preparation bound when the nonlocal component has CHSH value ``b_ext``."""
    case = _MODEL_CASE[BoundModel.parse(model)]
    return -math.log2(1 - (b_obs - 2) * _deficit_rate(case, b_ext))


# ---------------------------------------------------------------------------
# max-CL behavior


_MAX_CL_START = (0.5940, 1.0192, 2.5476, 2.1224, 4.6890, 1.5474, 4.6890, 1.5474, 0.4804)


@functools.lru_cache(maxsize=None)
def _max_cl_params() -> tuple[np.ndarray, int]:
    """Polish the tabulated maximiser of the CL parameter to full precision."""
    from .quantum import outcome_amplitude, probabilities, probability_jacobian

    i1, i4 = 0, 12  # P(++|11), P(++|22)
    # zeros P(-+|21), P(+-|12) as vanishing amplitudes, which keeps them regular
    zero_cells = ((1, 0, -1, 1), (0, 1, 1, -1))
    best = None
    for sign in (1, -1):

        def obj(p, s=sign):
            pr = probabilities(p, s)
            jac = probability_jacobian(p, s)
            return -(pr[i1] - pr[i4]), -(jac[i1] - jac[i4])

        def amps(p, s=sign):
            out = [outcome_amplitude(p, *c, sign=s) for c in zero_cells]
            vals = np.array([v for a, _ in out for v in (a.real, a.imag)])
            jac = np.array([row for _, g in out for row in (g.real, g.imag)])
            return vals, jac

        cons = [{"type": "eq", "fun": lambda p: amps(p)[0], "jac": lambda p: amps(p)[1]}]
        bounds = [(0, math.pi)] * 4 + [(0, 2 * math.pi)] * 4 + [(0, 1)]
        res = minimize(
            obj, np.array(_MAX_CL_START), jac=True, method="SLSQP", bounds=bounds, constraints=cons,
            options={"ftol": 1e-16, "maxiter": 500},
        )
        if best is None or res.fun < best[0].fun:
            best = (res, sign)
    res, sign = best
    return res.x, sign


def max_cl_correlators() -> CorrelatorSet:
    """Correlators of the quantum behavior with the largest CL parameter."""
    params, sign = _max_cl_params()
    ax, by, axby = correlators_from_params(params, sign)
    return CorrelatorSet(ax=ax, by=by, axby=axby)


@functools.lru_cache(maxsize=None)
def max_cl_constants() -> tuple[float, float]:
    """``(P_CL max, guessing probability)`` of the max-CL behavior at full precision."""
    params, sign = _max_cl_params()
    b = behavior_from_params(params, sign)
    return float(witness_value(b, WitnessKind.CL).value), guessing_probability(b)[0]


# ---------------------------------------------------------------------------


def guessing_from_mixture(extremal_guess: float, q: float) -> float:
    """Guess for ``q`` parts extremal behavior and ``1 - q`` parts deterministic points."""
    if not 0.25 <= extremal_guess <= 1.0:
        raise ValueError(f"extremal guessing probability {extremal_guess} outside [1/4, 1]")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"mixing weight {q} outside [0, 1]")
    return 1.0 - q * (1.0 - extremal_guess)


def _cl_max(printed: bool) -> float:
    return CL_MAX_PRINTED if printed else max_cl_constants()[0]


def bound_domain(model: BoundModel | str, kind: WitnessKind | str | None = None, printed: bool = False):
    """Closed interval of witness values on which ``model`` is defined."""
    model = BoundModel.parse(model)
    kind = model.kinds[0] if kind is None else WitnessKind.parse(kind)
    if kind not in model.kinds:
        raise ValueError(f"{model.value} does not apply to the {kind.value} witness")
    if model is BoundModel.NS:
        return (2.0, 4.0) if kind is WitnessKind.CHSH else (0.0, 0.5)
    if model is BoundModel.HARDY_CONVEX:
        return 0.0, HARDY_MAX
    if model is BoundModel.CL_CONVEX:
        return 0.0, _cl_max(printed)
    return 2.0, TSIRELSON


def guaranteed_bound(model: BoundModel | str, witness: WitnessSpec, printed: bool = False) -> float:
    """Closed-form guaranteed min-entropy in bits.

    Parameters
    ----------
    model : BoundModel
    witness : WitnessSpec
        Must match one of ``model.kinds``.
    printed : bool
        Use the four-decimal constants as printed instead of values recomputed
        at full precision (affects the CL and Case 3 varying models).

    Raises
    ------
    DomainError
        When the witness value lies outside the model's interval.
    """
    model = BoundModel.parse(model)
    kind, v = witness.kind, float(witness.value)
    lo, hi = bound_domain(model, kind, printed)
    # the tolerance lets recomputed maxima match their printed roundings
    if not (lo - 1e-12 <= v <= hi + 1e-9):
        raise DomainError(f"{model.value} is defined for {kind.value} in [{lo:.10g}, {hi:.10g}], got {v}")
    v = min(max(v, lo), hi)
    if model is BoundModel.NS:
        g = 1.5 - v / 4 if kind is WitnessKind.CHSH else 1 - v
    elif model is BoundModel.Q_CASE1_VARYING:
        g = 1 - (4 + 5 * SQRT2) * (v - 2) / 16
    elif model is BoundModel.Q_CASE2_FIXED:
        # (B^2 - 4) / sqrt(4 - B sqrt(8 - B^2)) rationalised, which removes the 0/0 at B = 2
        return 4 - math.log2(4 + SQRT2 * math.sqrt(4 + v * math.sqrt(max(0.0, 8 - v * v))))
    elif model is BoundModel.Q_CASE2_VARYING:
        return 2 - math.log2(4 - (1 + SQRT3) * (v - 2))
    elif model is BoundModel.Q_CASE3_FIXED:
        if v == 2.0:
            return 0.0
        return 2 - math.log2((1 / v + 0.5) * (2 + math.sqrt(max(0.0, 8 - v * v))))
    elif model is BoundModel.Q_CASE3_VARYING:
        k = CASE3_COEFF_PRINTED if printed else case_coefficient(model)
        g = 1 - k * (v - 2)
    elif model is BoundModel.HARDY_CONVEX:
        g = 1 - HARDY_COEFF * v
    else:
        if printed:
            k = (1 - CL_GUESS_PRINTED) / CL_MAX_PRINTED
        else:
            pmax, guess = max_cl_constants()
            k = (1 - guess) / pmax
        g = 1 - k * v
    return max(0.0, -math.log2(g))
