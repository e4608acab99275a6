"""Augmented-Lagrangian local solver and a seeded multistart driver.

Problems are ``min f(x)`` subject to ``c(x) = 0``, ``g(x) <= 0`` and box bounds.
Inequalities use the Powell-Hestenes-Rockafellar shifted penalty, so the inner
problems are smooth and only carry the box, which L-BFGS-B handles directly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

__all__ = [
    "Constraint",
    "LocalResult",
    "OptOutcome",
    "AugLagOptions",
    "augmented_lagrangian",
    "multistart_driver",
    "sobol_starts",
    "slsqp_polish",
    "CONSTRAINT_TOL",
]

CONSTRAINT_TOL = 1e-8

# f(x) -> (value, gradient)
Objective = Callable[[np.ndarray], tuple[float, np.ndarray]]


@dataclass(frozen=True)
class Constraint:
    """Vector constraint ``fun(x) -> (values, jacobian)``; ``kind`` is "eq" or "ineq" (``<= 0``)."""

    fun: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
    kind: str = "eq"

    def __post_init__(self):
        if self.kind not in ("eq", "ineq"):
            raise ValueError(f"constraint kind must be 'eq' or 'ineq', got {self.kind!r}")


@dataclass(frozen=True)
class AugLagOptions:
    penalty0: float = 1.0
    growth: float = 10.0
    max_penalty: float = 1e10
    max_outer: int = 40
    tol: float = 1e-13
    ftol: float = 1e-13
    inner_maxiter: int = 3000


# cheap first pass used to rank the starts before polishing
SCREEN_OPTIONS = AugLagOptions(max_outer=12, tol=1e-7, ftol=1e-8, inner_maxiter=400)
SCREEN_TOL = 1e-5


@dataclass(frozen=True)
class LocalResult:
    x: np.ndarray
    value: float
    residuals: np.ndarray
    converged: bool
    start_index: int
    outer_iterations: int

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residuals))) if self.residuals.size else 0.0


@dataclass(frozen=True)
class OptOutcome:
    """Best local optimum of a multistart search.

    ``best_value`` is in the caller's sense (see the producing function).
    ``constraint_residuals`` are the equality values and inequality
    violations at ``params``.
    """

    best_value: float
    params: np.ndarray
    constraint_residuals: np.ndarray
    starts_used: int
    converged: bool
    local_optima: tuple[LocalResult, ...] = field(default=(), repr=False)
    extra: dict = field(default_factory=dict, repr=False)

    @property
    def max_residual(self) -> float:
        r = np.asarray(self.constraint_residuals)
        return float(np.max(np.abs(r))) if r.size else 0.0


def _stack(constraints: Sequence[Constraint], kind: str, x: np.ndarray, n: int):
    vals, jacs = [], []
    for c in constraints:
        if c.kind != kind:
            continue
        v, J = c.fun(x)
        vals.append(np.atleast_1d(np.asarray(v, dtype=float)))
        jacs.append(np.atleast_2d(np.asarray(J, dtype=float)).reshape(-1, n))
    if not vals:
        return np.zeros(0), np.zeros((0, n))
    return np.concatenate(vals), np.vstack(jacs)


def residuals(constraints: Sequence[Constraint], x: np.ndarray) -> np.ndarray:
    """Equality values followed by positive parts of the inequalities."""
    n = len(x)
    ce, _ = _stack(constraints, "eq", x, n)
    ci, _ = _stack(constraints, "ineq", x, n)
    return np.concatenate([ce, np.maximum(ci, 0.0)])


def augmented_lagrangian(
    objective: Objective,
    constraints: Sequence[Constraint],
    x0,
    bounds: Sequence[tuple[float, float]],
    options: AugLagOptions | None = None,
    start_index: int = 0,
) -> LocalResult:
    """Local minimisation from ``x0``.

    The penalty grows by ``options.growth`` whenever an outer iteration fails
    to cut the constraint violation by a factor of four.
    """
    opts = options or AugLagOptions()
    x = np.clip(np.asarray(x0, dtype=float), [b[0] for b in bounds], [b[1] for b in bounds])
    n = x.size
    ce, _ = _stack(constraints, "eq", x, n)
    ci, _ = _stack(constraints, "ineq", x, n)
    lam = np.zeros(ce.size)
    mu = np.zeros(ci.size)
    rho = opts.penalty0
    prev_viol = math.inf
    prev_f = math.inf
    converged = False
    k = 0
    for k in range(1, opts.max_outer + 1):

        def lagr(z, lam=lam, mu=mu, rho=rho):
            f, g = objective(z)
            ce, Je = _stack(constraints, "eq", z, n)
            ci, Ji = _stack(constraints, "ineq", z, n)
            val = f + lam @ ce + 0.5 * rho * ce @ ce
            grad = g + Je.T @ (lam + rho * ce)
            sh = np.maximum(0.0, mu + rho * ci)
            val += (sh @ sh - mu @ mu) / (2 * rho)
            grad = grad + Ji.T @ sh
            return val, grad

        res = minimize(
            lagr, x, jac=True, method="L-BFGS-B", bounds=bounds,
            options={"maxiter": opts.inner_maxiter, "ftol": 1e-16, "gtol": 1e-12, "maxcor": 20},
        )
        x = res.x
        f, _ = objective(x)
        ce, _ = _stack(constraints, "eq", x, n)
        ci, _ = _stack(constraints, "ineq", x, n)
        viol = max(
            float(np.max(np.abs(ce))) if ce.size else 0.0,
            float(np.max(np.maximum(ci, -mu / rho))) if ci.size else 0.0,
        )
        lam = lam + rho * ce
        mu = np.maximum(0.0, mu + rho * ci)
        if viol <= opts.tol and abs(f - prev_f) <= opts.ftol * max(1.0, abs(f)):
            converged = True
            break
        if viol > 0.25 * prev_viol:
            rho = min(rho * opts.growth, opts.max_penalty)
        prev_viol = viol
        prev_f = f
    r = residuals(constraints, x)
    f, _ = objective(x)
    feasible = bool(r.size == 0 or np.max(np.abs(r)) <= CONSTRAINT_TOL)
    return LocalResult(x=x, value=float(f), residuals=r, converged=converged and feasible,
                       start_index=start_index, outer_iterations=k)


def slsqp_polish(
    objective: Objective,
    constraints: Sequence[Constraint],
    x0,
    bounds: Sequence[tuple[float, float]],
    start_index: int = 0,
    maxiter: int = 200,
) -> LocalResult:
    """Sequential quadratic programming from a nearby point.

    Converges quadratically once the active constraints are regular, which
    the penalty method alone does not reach at tight tolerances.
    """
    cons = [
        {
            "type": c.kind if c.kind == "eq" else "ineq",
            # SLSQP wants g(x) >= 0
            "fun": (lambda z, c=c: c.fun(z)[0]) if c.kind == "eq" else (lambda z, c=c: -c.fun(z)[0]),
            "jac": (lambda z, c=c: c.fun(z)[1]) if c.kind == "eq" else (lambda z, c=c: -c.fun(z)[1]),
        }
        for c in constraints
    ]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = minimize(
            objective, np.asarray(x0, dtype=float), jac=True, method="SLSQP", bounds=bounds,
            constraints=cons, options={"ftol": 1e-16, "maxiter": maxiter},
        )
    x = np.clip(res.x, [b[0] for b in bounds], [b[1] for b in bounds])
    r = residuals(constraints, x)
    f, _ = objective(x)
    feasible = bool(r.size == 0 or np.max(np.abs(r)) <= CONSTRAINT_TOL)
    return LocalResult(x=x, value=float(f), residuals=r, converged=feasible,
                       start_index=start_index, outer_iterations=int(res.nit))


def sobol_starts(lower, upper, starts: int, seed: int) -> np.ndarray:
    """``starts`` scrambled Sobol points in the box, reproducible from ``seed``."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    sampler = qmc.Sobol(d=lower.size, scramble=True, seed=seed)
    m = max(0, math.ceil(math.log2(max(1, starts))))
    pts = sampler.random_base2(m)[:starts]
    return qmc.scale(pts, lower, upper) if np.any(upper > lower) else np.tile(lower, (starts, 1))


def multistart_driver(
    objective: Objective,
    constraints: Sequence[Constraint],
    box: tuple[Sequence[float], Sequence[float]],
    starts: int,
    seed: int = 0,
    initial_points=None,
    options: AugLagOptions | None = None,
    polish: int = 4,
) -> OptOutcome:
    """Run the local solver from low-discrepancy points and keep the best feasible optimum.

    Parameters
    ----------
    objective : callable
        ``x -> (f, grad)``; minimised.
    constraints : sequence of Constraint
    box : (lower, upper)
        Bounds; coordinates with ``lower == upper`` are held fixed.
    starts : int
        Number of Sobol start points.
    seed : int
        Scrambling seed; equal seeds give bit-identical outcomes.
    initial_points : array_like, optional
        Extra start points tried before the Sobol ones.
    options : AugLagOptions, optional
        Settings of the final local solves.
    polish : int
        Every start first gets a loose solve; the ``polish`` best of those are
        then re-solved with ``options``.  Zero or less runs every start at full
        accuracy.

    Returns
    -------
    OptOutcome
        ``best_value`` is the minimum of ``objective``.  Ties go to the lower
        start index.
    """
    if starts < 1 and initial_points is None:
        raise ValueError("need at least one start")
    lower = np.asarray(box[0], dtype=float)
    upper = np.asarray(box[1], dtype=float)
    if lower.shape != upper.shape or np.any(lower > upper):
        raise ValueError("box bounds are malformed")
    free = upper > lower

    def full(z):
        x = lower.copy()
        x[free] = z
        return x

    def f_red(z):
        v, g = objective(full(z))
        return v, np.asarray(g)[free]

    def wrap(c: Constraint) -> Constraint:
        def fun(z):
            v, J = c.fun(full(z))
            return v, np.atleast_2d(J)[:, free]

        return Constraint(fun, c.kind)

    cons = [wrap(c) for c in constraints]
    bounds = list(zip(lower[free], upper[free]))
    pts = []
    if initial_points is not None:
        pts.extend(np.atleast_2d(np.asarray(initial_points, dtype=float))[:, free])
    if starts > 0:
        pts.extend(sobol_starts(lower[free], upper[free], starts, seed))
    results: list[LocalResult] = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if polish <= 0:
            for i, z0 in enumerate(pts):
                results.append(augmented_lagrangian(f_red, cons, z0, bounds, options, start_index=i))
            final = results
        else:
            for i, z0 in enumerate(pts):
                results.append(augmented_lagrangian(f_red, cons, z0, bounds, SCREEN_OPTIONS, start_index=i))
            ok = [r for r in results if r.max_residual <= SCREEN_TOL]
            ranked = sorted(ok, key=lambda r: (r.value, r.start_index)) if ok else sorted(
                results, key=lambda r: (r.max_residual, r.start_index)
            )
            final = [
                augmented_lagrangian(f_red, cons, r.x, bounds, options, start_index=r.start_index)
                for r in ranked[:polish]
            ]
    final = [LocalResult(full(r.x), r.value, r.residuals, r.converged, r.start_index, r.outer_iterations) for r in final]
    feasible = [r for r in final if r.residuals.size == 0 or r.max_residual <= CONSTRAINT_TOL]
    pool = feasible or final
    best = min(pool, key=lambda r: (r.value if feasible else r.max_residual, r.start_index))
    return OptOutcome(
        best_value=best.value,
        params=best.x,
        constraint_residuals=best.residuals,
        starts_used=len(pts),
        converged=bool(feasible),
        local_optima=tuple(final),
    )
