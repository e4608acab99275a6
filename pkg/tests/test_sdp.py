import math

import numpy as np
import pytest

from randcert.behavior import WitnessKind, WitnessSpec
from randcert.quantum import HARDY_MAX, Family, canonical_behavior, canonical_correlators
from randcert.sdp import (
    InfeasibleWitnessError,
    Level,
    SdpProblem,
    SdpStatus,
    SolverOptions,
    di_curve,
    di_guaranteed,
    lmi_margin,
    moment_matrix,
    moments_from_behavior,
    ns_lp,
    ns_lp_highs,
    relaxation_margin,
    relaxation_maximum,
    solve_functional,
    solve_sdp,
    witness_domain,
)
from randcert.sdp.npa import chsh_functional, witness_constraints
from randcert.vertices import catalog, pr_box

SQRT2 = math.sqrt(2)
TSIRELSON = 2 * SQRT2

# frozen outputs of the L0 vertex LP and the L1ab relaxation
L0_HARDY_0902 = 0.136379
L0_CL_1078 = 0.164561
L1AB_HARDY_0901 = 0.661604
L1AB_CL_1078 = 0.630424
L1AB_CHSH_TSIRELSON = -math.log2((2 + SQRT2) / 8)


def _chsh_row():
    row = np.zeros(16)
    signs = {(0, 0): 1, (0, 1): 1, (1, 0): 1, (1, 1): -1}
    for (x, y), s in signs.items():
        for ia, a in enumerate((1, -1)):
            for ib, b in enumerate((1, -1)):
                row[8 * x + 4 * y + 2 * ia + ib] = s * a * b
    return row


class TestSolver:
    def test_two_by_two(self):
        # max y s.t. [[1, y], [y, 1]] >= 0
        p = SdpProblem(np.array([1.0]), np.eye(2), np.array([[[0.0, 1.0], [1.0, 0.0]]]))
        sol = solve_sdp(p)
        assert sol.status is SdpStatus.OPTIMAL
        assert sol.value == pytest.approx(1.0, abs=1e-8)
        assert sol.duality_gap < 1e-7

    def test_minimize(self):
        p = SdpProblem(np.array([1.0]), np.eye(2), np.array([[[0.0, 1.0], [1.0, 0.0]]]), maximize=False)
        assert solve_sdp(p).value == pytest.approx(-1.0, abs=1e-8)

    def test_infeasible(self):
        # 1 - y >= 0 with y = 2
        p = SdpProblem(np.array([1.0]), np.eye(1), np.array([[[-1.0]]]), eq_matrix=[[1.0]], eq_rhs=[2.0])
        assert solve_sdp(p).status is SdpStatus.INFEASIBLE

    def test_margin(self):
        p = SdpProblem(np.array([1.0]), np.eye(2), np.array([[[0.0, 1.0], [1.0, 0.0]]]))
        assert lmi_margin(p) == pytest.approx(1.0, abs=1e-8)

    def test_shape_checks(self):
        with pytest.raises(ValueError):
            SdpProblem(np.array([1.0]), np.eye(2), np.zeros((1, 3, 3)))
        with pytest.raises(ValueError):
            SdpProblem(np.array([1.0]), np.eye(2), np.array([[[0.0, 1.0], [0.0, 0.0]]]))

    def test_iteration_cap(self):
        sol = solve_functional(Level.L1AB, _chsh_row(), options=SolverOptions(max_iter=2))
        assert sol.status is SdpStatus.MAX_ITER


class TestNpa:
    def test_sizes(self):
        assert moment_matrix("L1").size == 5
        assert moment_matrix("L1ab").size == 9

    @pytest.mark.parametrize("level", ["L1", "L1ab"])
    def test_tsirelson(self, level):
        assert solve_functional(level, _chsh_row()).value == pytest.approx(TSIRELSON, abs=1e-6)

    def test_chsh_functional(self):
        mm = moment_matrix("L1ab")
        y = moments_from_behavior(mm, canonical_correlators(Family.CASE1))
        assert chsh_functional(mm)(y) == pytest.approx(TSIRELSON)

    def test_quantum_members(self):
        for fam in (Family.CASE1, Family.MAX_HARDY, Family.MAX_CL):
            assert relaxation_margin(canonical_behavior(fam), Level.L1AB) > -1e-7

    def test_pr_box_excluded(self):
        assert relaxation_margin(pr_box(1), Level.L1) < -0.4

    def test_level_parse(self):
        assert Level.parse("L1+ab") is Level.L1AB
        with pytest.raises(ValueError):
            Level.parse("L2")


class TestNsLp:
    @pytest.mark.parametrize("kind,lo,hi", [(WitnessKind.CHSH, -4, 4), (WitnessKind.HARDY, 0, 0.5), (WitnessKind.CL, 0, 0.5)])
    def test_exact_matches_highs(self, rng, kind, lo, hi):
        for v in np.linspace(lo, hi, 11):
            cons = witness_constraints(WitnessSpec(kind, float(v)))
            C = rng.normal(size=(4, 16))
            for maximize in (True, False):
                fast = ns_lp(C, cons, maximize)
                ref = [ns_lp_highs(c, cons, maximize) for c in C]
                np.testing.assert_allclose(fast, ref, atol=1e-10)

    def test_general_constraints(self, rng):
        rows = np.vstack([witness_constraints(WitnessSpec(WitnessKind.CHSH, 2.5)).value_row, rng.normal(size=16)])
        rhs = [2.5, 0.05]
        assert ns_lp(np.eye(16)[0], (rows, rhs)) == pytest.approx(ns_lp_highs(np.eye(16)[0], (rows, rhs)))

    def test_infeasible(self):
        with pytest.raises(InfeasibleWitnessError):
            ns_lp(np.eye(16)[0], (np.eye(16)[:1], [1.5]))
        with pytest.raises(InfeasibleWitnessError):
            ns_lp(np.eye(16)[0], (np.eye(16)[:4], [0.0, 0.0, 0.0, 0.0]))

    def test_vectorised(self):
        out = ns_lp(np.eye(16))
        assert out.shape == (16,)
        np.testing.assert_allclose(out, 1.0)

    def test_vertex_maxima(self):
        V = catalog().matrix()
        row = _chsh_row()
        assert ns_lp(row) == pytest.approx(float((V @ row).max()))
        assert ns_lp(row, maximize=False) == pytest.approx(float((V @ row).min()))


class TestGuaranteed:
    def test_l0(self):
        assert di_guaranteed(WitnessSpec(WitnessKind.HARDY, 0.0902), "L0").bits == pytest.approx(L0_HARDY_0902, abs=1e-6)
        assert di_guaranteed(WitnessSpec(WitnessKind.CL, 0.1078), "L0").bits == pytest.approx(L0_CL_1078, abs=1e-6)

    def test_l1ab(self):
        r = di_guaranteed(WitnessSpec(WitnessKind.HARDY, 0.0901), "L1ab")
        assert r.status is SdpStatus.OPTIMAL
        assert r.bits == pytest.approx(L1AB_HARDY_0901, abs=1e-5)
        assert di_guaranteed(WitnessSpec(WitnessKind.CL, 0.1078), "L1ab").bits == pytest.approx(L1AB_CL_1078, abs=1e-5)
        assert di_guaranteed(WitnessSpec(WitnessKind.CHSH, TSIRELSON), "L1ab").bits == pytest.approx(L1AB_CHSH_TSIRELSON, abs=1e-5)

    def test_above_quantum_max(self):
        with pytest.raises(InfeasibleWitnessError):
            di_guaranteed(WitnessSpec(WitnessKind.HARDY, 0.0902), "L1ab")

    def test_certificate(self):
        from randcert.sdp.npa import _prob_functionals, build_problem

        mm = moment_matrix("L1ab")
        cons = witness_constraints(WitnessSpec(WitnessKind.HARDY, 0.2))
        sol = solve_sdp(build_problem(mm, _prob_functionals(mm)[0], cons))
        assert sol.status is SdpStatus.INFEASIBLE
        assert sol.certificate is not None and sol.certificate.valid
        with pytest.raises(InfeasibleWitnessError):
            di_guaranteed(WitnessSpec(WitnessKind.HARDY, 0.2), "L1ab")

    def test_local_point(self):
        assert di_guaranteed(WitnessSpec(WitnessKind.CHSH, 2.0), "L1").bits == pytest.approx(0.0, abs=1e-6)

    def test_levels_nested(self):
        w = WitnessSpec(WitnessKind.CL, 0.05)
        b0, b1, b2 = (di_guaranteed(w, lv).bits for lv in ("L0", "L1", "L1ab"))
        assert b0 <= b1 + 1e-7 <= b2 + 2e-7

    def test_curve_monotone(self):
        res = di_curve("Hardy", "L1", np.linspace(0.0, 0.08, 5))
        assert np.all(np.diff([r.bits for r in res]) > -1e-7)

    def test_domain(self):
        assert witness_domain("Hardy", "L0") == (0.0, 0.5)
        assert relaxation_maximum(WitnessKind.HARDY, Level.L1AB) == pytest.approx(HARDY_MAX, abs=1e-8)
        assert relaxation_maximum(WitnessKind.CL, Level.L1AB) == pytest.approx(0.1078127177489365, abs=1e-8)
