"""The twelve acceptance criteria as callable checks.

Each check returns a :class:`CriterionResult` holding measured values, targets
and tolerances.  ``tests/test_acceptance.py`` and ``randcert verify`` both run
them from here.
"""

from __future__ import annotations

import io
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .behavior import Behavior, WitnessKind, WitnessSpec, guessing_probability, hardy_probs, witness_value
from .bounds import BoundModel, case_minimizer, guaranteed_bound
from .quantum import HARDY_MAX, Family, canonical_behavior
from .sdp.guaranteed import InfeasibleWitnessError, di_guaranteed, ns_lp
from .sdp.npa import Level, solve_functional, witness_constraints
from .sdp.solver import SdpStatus, SolverOptions
from .vertices import catalog, pr_box

__all__ = ["CriterionResult", "CRITERIA", "TABLE_ROWS", "run_criterion", "run_all", "format_line"]

SQRT2 = math.sqrt(2.0)
PROPERTY_SEED = 12345
PROPERTY_SAMPLES = 1000


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)
    target: dict = field(default_factory=dict)
    tolerance: dict = field(default_factory=dict)
    runtime: float = 0.0
    runtime_budget: float | None = None
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "criterion": self.number,
            "name": self.name,
            "passed": self.passed,
            "measured": self.measured,
            "target": self.target,
            "tolerance": self.tolerance,
            "runtime_s": round(self.runtime, 3),
            "runtime_budget_s": self.runtime_budget,
            "detail": self.detail,
        }


def format_line(r: CriterionResult) -> str:
    mark = "PASS" if r.passed else "FAIL"
    budget = f"/{r.runtime_budget:g}s" if r.runtime_budget else ""
    tail = f" - {r.detail}" if r.detail else ""
    return f"[{mark}] criterion {r.number:2d} {r.name} ({r.runtime:.1f}s{budget}){tail}"


def _close(measured, target, tol) -> bool:
    return measured is not None and abs(measured - target) <= tol


# ---------------------------------------------------------------------------


def _c1(opts):
    """NS closed forms against their formulas and the vertex LP."""
    grids = {
        WitnessKind.CHSH: (np.linspace(2, 4, 50), lambda v: -math.log2(1.5 - v / 4)),
        WitnessKind.HARDY: (np.linspace(0, 0.5, 50), lambda v: -math.log2(1 - v)),
        WitnessKind.CL: (np.linspace(0, 0.5, 50), lambda v: -math.log2(1 - v)),
    }
    eye = np.eye(16)
    formula_err, lp_err = 0.0, 0.0
    for kind, (grid, ref) in grids.items():
        for v in grid:
            w = WitnessSpec(kind, float(v))
            bits = guaranteed_bound(BoundModel.NS, w)
            formula_err = max(formula_err, abs(bits - max(0.0, ref(v))))
            cons = witness_constraints(w)
            pstar = float(ns_lp(eye, cons).max())
            lp_err = max(lp_err, abs(-math.log2(pstar) - bits))
    passed = formula_err <= 1e-12 and lp_err <= 1e-10
    return passed, {"formula_max_err": formula_err, "lp_max_err": lp_err}, {}, {"formula": 1e-12, "lp": 1e-10}, ""


def _c2(opts):
    b = pr_box(1)
    chsh = witness_value(b, WitnessKind.CHSH).value
    ph = witness_value(b, WitnessKind.HARDY).value
    pcl = witness_value(b, WitnessKind.CL).value
    bits = -math.log2(guessing_probability(b)[0])
    passed = chsh == 4.0 and ph == 0.5 and pcl == 0.5 and bits == 1.0
    return passed, {"chsh": chsh, "p_hardy": ph, "p_cl": pcl, "bits": bits}, {
        "chsh": 4.0, "p_hardy": 0.5, "p_cl": 0.5, "bits": 1.0}, {"all": 0.0}, ""


def _random_ns(rng, n):
    V = catalog().matrix()
    W = rng.dirichlet(np.full(len(V), 0.3), size=n)
    return W @ V


def _c3(opts):
    rng = np.random.default_rng(PROPERTY_SEED)
    worst = 0.0
    for P in _random_ns(rng, PROPERTY_SAMPLES):
        b = Behavior(P)
        p1, p2, p3, p4 = hardy_probs(b)
        worst = max(worst, abs(witness_value(b, WitnessKind.CHSH).value - (2 + 4 * (p1 - p2 - p3 - p4))))
    return worst <= 1e-12, {"max_err": worst, "samples": PROPERTY_SAMPLES}, {}, {"identity": 1e-12}, ""


def _product(rng, force_zeros: bool):
    """Random product behavior; with ``force_zeros`` the two shared zeros are imposed."""
    pa = rng.uniform(size=2)  # P_A(+|x)
    pb = rng.uniform(size=2)  # P_B(+|y)
    if force_zeros:
        # P(-+|21) = (1 - pa[1]) pb[0] and P(+-|12) = pa[0] (1 - pb[1]) must vanish
        if rng.uniform() < 0.5:
            pa[1] = 1.0
        else:
            pb[0] = 0.0
        if rng.uniform() < 0.5:
            pa[0] = 0.0
        else:
            pb[1] = 1.0
    ma = np.stack([pa, 1 - pa], axis=1)
    mb = np.stack([pb, 1 - pb], axis=1)
    return Behavior(np.einsum("xa,yb->xyab", ma, mb).reshape(16))


def _c4(opts):
    """Product behaviors can satisfy neither the Hardy nor the CL conditions."""
    rng = np.random.default_rng(PROPERTY_SEED + 1)
    hardy_bad = cl_bad = zero_bad = 0
    slack = 0.0
    for _ in range(PROPERTY_SAMPLES):
        b = _product(rng, force_zeros=True)
        p1, p2, p3, p4 = hardy_probs(b)
        if max(p2, p3) > 1e-15:
            zero_bad += 1
        # CL: the zeros force p1 <= p4, so P_CL > 0 is impossible
        if p1 - p4 > 1e-12:
            cl_bad += 1
        # Hardy: adding p4 = 0 forces p1 = 0
        if p4 <= 1e-12 and p1 > 1e-12:
            hardy_bad += 1
        g = _product(rng, force_zeros=False)
        q1, q2, q3, q4 = hardy_probs(g)
        slack = max(slack, q1 - q2 - q3 - q4)
    passed = hardy_bad == 0 and cl_bad == 0 and zero_bad == 0 and slack <= 1e-12
    measured = {"hardy_violations": hardy_bad, "cl_violations": cl_bad, "zeros_missed": zero_bad, "max_p1_minus_rest": slack}
    return passed, measured, {
        "violations": 0}, {"p1_minus_rest": 1e-12}, ""


def _chsh_row():
    row = np.zeros(16)
    for x in (0, 1):
        for y in (0, 1):
            s = -1.0 if (x, y) == (1, 1) else 1.0
            for ia, a in enumerate((1, -1)):
                for ib, b in enumerate((1, -1)):
                    row[8 * x + 4 * y + 2 * ia + ib] = s * a * b
    return row


def _c5(opts):
    sol = solve_functional(Level.L1, _chsh_row(), options=opts.get("sdp"))
    passed = sol.optimal and _close(sol.value, 2 * SQRT2, 1e-6)
    detail = "" if sol.optimal else sol.status.value
    return passed, {"chsh_max": sol.value, "status": sol.status.value}, {"chsh_max": 2 * SQRT2}, {"abs": 1e-6}, detail


C6_CASES = (
    ("hardy_L1ab", WitnessKind.HARDY, 0.0902, Level.L1AB, 0.6674, 2e-3),
    ("cl_L1ab", WitnessKind.CL, 0.1078, Level.L1AB, 0.6207, 2e-3),
    ("hardy_L0", WitnessKind.HARDY, 0.0902, Level.L0, 0.1364, 1e-3),
    ("cl_L0", WitnessKind.CL, 0.1078, Level.L0, 0.1646, 1e-3),
    ("chsh_L1ab", WitnessKind.CHSH, 2 * SQRT2, Level.L1AB, 1.23, 1e-2),
)


def _c6(opts):
    measured, target, tol, notes = {}, {}, {}, []
    ok = True
    for key, kind, v, level, tgt, t in C6_CASES:
        target[key], tol[key] = tgt, t
        try:
            r = di_guaranteed(WitnessSpec(kind, v), level, opts.get("sdp"))
        except InfeasibleWitnessError:
            measured[key] = "infeasible"
            notes.append(f"{key} infeasible")
            ok = False
            continue
        measured[key] = r.bits
        if r.status is not SdpStatus.OPTIMAL:
            notes.append(f"{key} {r.status.value}")
            ok = False
        elif not _close(r.bits, tgt, t):
            notes.append(f"{key} {r.bits:.4f} vs {tgt}")
            ok = False
    return ok, measured, target, tol, "; ".join(notes)


def _c7(opts):
    b1 = canonical_behavior(Family.CASE1)
    case1_fixed = max(-math.log2(b1.table[x, y].max()) for x in (0, 1) for y in (0, 1))
    case1_varying = guaranteed_bound(BoundModel.Q_CASE1_VARYING, WitnessSpec(WitnessKind.CHSH, 2 * SQRT2))
    m2 = case_minimizer(BoundModel.Q_CASE2_VARYING)
    m3 = case_minimizer(BoundModel.Q_CASE3_VARYING)
    worst = -math.inf
    for v in np.linspace(2, 2 * SQRT2, 101)[1:]:
        w = WitnessSpec(WitnessKind.CHSH, float(v))
        for vary, fixed in (
            (BoundModel.Q_CASE2_VARYING, BoundModel.Q_CASE2_FIXED),
            (BoundModel.Q_CASE3_VARYING, BoundModel.Q_CASE3_FIXED),
        ):
            worst = max(worst, guaranteed_bound(vary, w) - guaranteed_bound(fixed, w))
    passed = (
        _close(case1_fixed, 1.2284, 1e-4)
        and _close(case1_varying, 1.2284, 1e-4)
        and _close(m2, 2.8185, 1e-4)
        and _close(m3, 2.2372, 1e-4)
        and worst <= 0.0
    )
    return passed, {
        "case1_fixed": case1_fixed, "case1_varying_at_max": case1_varying, "case2_minimizer": m2,
        "case3_minimizer": m3, "max_varying_minus_fixed": worst,
    }, {"case1": 1.2284, "case2_minimizer": 2.8185, "case3_minimizer": 2.2372, "varying_minus_fixed": 0.0}, {
        "abs": 1e-4}, ""


# (label, witness kind, witness value, printed bits)
TABLE_ROWS = (
    ("table1_row1", WitnessKind.HARDY, 0.0640, 1.6787),
    ("table1_row2", WitnessKind.HARDY, 0.0902, 1.3937),
    ("table2_row1", WitnessKind.CL, 0.0002, 1.9995),
    ("table2_row2", WitnessKind.CL, 0.1078, 1.5814),
)


def _c8(opts):
    from .optimize.randomness import DEFAULT_SEED, max_dd_randomness

    measured, target, notes = {}, {}, []
    ok = True
    for label, kind, v, bits in TABLE_ROWS:
        out = max_dd_randomness(WitnessSpec(kind, v), starts=opts.get("starts"), seed=opts.get("seed", DEFAULT_SEED))
        measured[label] = {"bits": out.best_value, "residual": out.max_residual, "converged": out.converged}
        target[label] = bits
        if not out.converged or out.max_residual > 1e-8:
            notes.append(f"{label} infeasible (residual {out.max_residual:.1e})")
            ok = False
        elif not _close(out.best_value, bits, 5e-3):
            notes.append(f"{label} {out.best_value:.4f} vs {bits}")
            ok = False
    return ok, measured, target, {"bits": 5e-3, "residual": 1e-8}, "; ".join(notes)


def _c9(opts):
    from .optimize.randomness import DEFAULT_SEED, maximize_witness

    out = maximize_witness(WitnessKind.CL, alpha=1 / SQRT2, seed=opts.get("seed", DEFAULT_SEED))
    passed = out.converged and out.best_value < 1e-4
    return passed, {"max_p_cl": out.best_value, "residual": out.max_residual}, {"max_p_cl": "< 1e-4"}, {}, ""


SCAN_TARGETS = (
    (WitnessKind.HARDY, 0.064, 1.67),
    (WitnessKind.CL, 0.070, 1.995),
)
SCAN_WINDOW = 5e-3
SCAN_SAMPLES = 500


def _c10(opts):
    from .bounds import max_cl_correlators
    from .optimize.extremal import extremal_scan, extremality_check
    from .quantum import canonical_correlators

    measured, notes = {}, []
    ok = True
    for name, c in (("max_hardy", canonical_correlators(Family.MAX_HARDY)), ("max_cl", max_cl_correlators())):
        rep = extremality_check(c, 1e-4)
        measured[name] = {"equality_residual": rep.equality_residual, "product": rep.product_value, "passes": rep.passes}
        if not rep.passes:
            ok = False
            notes.append(f"{name} fails the extremality test")
    for kind, centre, need in SCAN_TARGETS:
        pts = extremal_scan(kind, samples=opts.get("samples", SCAN_SAMPLES), seed=opts.get("seed", 0))
        near = [p for p in pts if abs(p.witness_value - centre) <= SCAN_WINDOW]
        best = max(near, key=lambda p: p.r_max_bits) if near else None
        key = f"scan_{kind.value.lower()}"
        measured[key] = {
            "best_bits_near": best.r_max_bits if best else None,
            "at_witness": best.witness_value if best else None,
            "survivors": len(pts),
        }
        if best is None or best.r_max_bits < need:
            ok = False
            got = f"{best.r_max_bits:.4f}" if best else "none"
            notes.append(f"{kind.value} scan best near {centre} is {got}, need >= {need}")
    return ok, measured, {"scan_hardy": ">= 1.67 near 0.064", "scan_cl": ">= 1.995 near 0.070"}, {
        "extremality": 1e-4, "window": SCAN_WINDOW}, "; ".join(notes)


COMPARE_POINTS = 8


def compare_grid(points: int = COMPARE_POINTS) -> np.ndarray:
    """CHSH values in ``(2, 2 + 4 P_Hardy max]``."""
    return np.linspace(2, 2 + 4 * HARDY_MAX, points + 1)[1:]


def _c11(opts):
    from .cli import compare_rows

    rows = compare_rows(compare_grid(opts.get("compare_points", COMPARE_POINTS)), Level.L1AB, opts.get("sdp"))
    worst = -math.inf
    notes = []
    for r in rows:
        if r["status"] != "ok":
            notes.append(f"B={r['chsh']:.4f}: {r['status']}")
            continue
        worst = max(worst, r["bits_cl"] - r["bits_hardy"], r["bits_chsh"] - r["bits_cl"])
    passed = not notes and worst <= 1e-6
    return passed, {"max_order_violation": worst, "points": len(rows)}, {"order": "Hardy >= CL >= CHSH"}, {
        "slack": 1e-6}, "; ".join(notes)


def _c12(opts):
    from .cli import main

    outs = []
    for _ in range(2):
        buf = io.StringIO()
        code = main(["tables", "--starts", str(opts.get("determinism_starts", 3)), "--format", "csv"], stdout=buf)
        outs.append((code, buf.getvalue()))
    same = outs[0][1] == outs[1][1] and len(outs[0][1]) > 0
    return same, {"identical": same, "bytes": len(outs[0][1])}, {"identical": True}, {}, ""


CRITERIA: dict[int, tuple[str, Callable, float | None]] = {
    1: ("NS closed forms", _c1, 1.0),
    2: ("PR-box anchors", _c2, None),
    3: ("CHSH identity", _c3, 1.0),
    4: ("factorisability exclusions", _c4, 1.0),
    5: ("Tsirelson check", _c5, 1.0),
    6: ("SDP figure endpoints", _c6, 30.0),
    7: ("analytic quantum cases", _c7, 1.0),
    8: ("optimizer tables", _c8, 600.0),
    9: ("singlet testbed", _c9, 60.0),
    10: ("extremality", _c10, 600.0),
    11: ("comparison figure", _c11, 120.0),
    12: ("determinism", _c12, None),
}


def run_criterion(number: int, sdp_options: SolverOptions | None = None, **opts) -> CriterionResult:
    """Run one criterion; exceptions are reported as failures."""
    name, fn, budget = CRITERIA[number]
    opts["sdp"] = sdp_options
    t0 = time.perf_counter()
    try:
        passed, measured, target, tol, detail = fn(opts)
    except Exception as exc:  # noqa: BLE001 - surfaced in the report
        passed, measured, target, tol, detail = False, {}, {}, {}, f"{type(exc).__name__}: {exc}"
    return CriterionResult(number, name, bool(passed), measured, target, tol, time.perf_counter() - t0, budget, detail)


def run_all(numbers=None, sdp_options: SolverOptions | None = None, **opts) -> list[CriterionResult]:
    return [run_criterion(n, sdp_options, **opts) for n in (numbers or sorted(CRITERIA))]
