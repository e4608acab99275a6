"""Worked examples with closed-form or independently derived answers."""

import io
import json
import math

import numpy as np
import pytest

from randcert.behavior import (
    Behavior,
    CorrelatorSet,
    WitnessKind,
    WitnessSpec,
    behavior_from_correlators,
    chsh_from_witness_probs,
    guessing_probability,
    hardy_probs,
    is_factorisable,
    min_entropy,
    mix,
    witness_value,
)
from randcert.bounds import BoundModel, bound_domain, case_minimizer, guaranteed_bound, guessing_from_mixture
from randcert.cli import main
from randcert.optimize import maximize_witness
from randcert.quantum import (
    HARDY_MAX,
    MAX_CL_PRINTED,
    Family,
    TiltedFamilyParams,
    behavior_from_params,
    canonical_behavior,
    canonical_correlators,
    correlators_from_params,
)
from randcert.sdp import Level, moment_matrix, moments_from_behavior, ns_lp, solve_functional
from randcert.sdp.npa import probability_functional, witness_constraints
from randcert.vertices import catalog, local_deterministic, pr_box

SQRT2, SQRT5 = math.sqrt(2), math.sqrt(5)
CASE1_PMAX = (1 + 1 / SQRT2) / 4

# tabulated optimiser settings (theta x1 x2 y1 y2, phi x1 x2 y1 y2), state amplitude last
HARDY_ROW1 = [0.9432, 1.3482, 2.1984, 1.7934, 4.6405, 1.4989, 4.6405, 1.4989, 0.5380]
CL_ROW2 = [0.5940, 1.0192, 2.5476, 2.1224, 4.6890, 1.5474, 4.6890, 1.5474, 0.4804]


def _chsh_row():
    return witness_constraints(WitnessSpec(WitnessKind.CHSH, 0.0)).value_row


class TestBehaviorExamples:
    def test_zero_correlators_uniform(self):
        b = behavior_from_correlators(CorrelatorSet([0, 0], [0, 0], [[0, 0], [0, 0]]))
        np.testing.assert_allclose(b.probs, 0.25)

    def test_case1_max_entry(self):
        assert canonical_behavior(Family.CASE1).probs.max() == pytest.approx(CASE1_PMAX, abs=1e-15)

    def test_min_entropy(self):
        assert min_entropy(pr_box(1), 0, 0) == pytest.approx(1.0)
        b = canonical_behavior(Family.CASE1)
        for x in (0, 1):
            for y in (0, 1):
                assert min_entropy(b, x, y) == pytest.approx(-math.log2(CASE1_PMAX))
        assert -math.log2(CASE1_PMAX) == pytest.approx(1.2284, abs=5e-5)

    def test_guessing(self):
        assert guessing_probability(Behavior.uniform()) == (0.25, (0, 0, 1, 1))
        assert guessing_probability(canonical_behavior(Family.MAX_CL))[0] == pytest.approx(0.6410, abs=5e-5)
        assert guessing_probability(canonical_behavior(Family.MAX_HARDY))[0] == pytest.approx((SQRT5 - 1) / 2, abs=1e-14)

    def test_ld_vertices(self):
        for v in catalog().ld:
            assert abs(witness_value(v, "CHSH").value) <= 2
            p1, p2, p3, p4 = hardy_probs(v)
            if p2 == p3 == p4 == 0:
                assert p1 == 0
            assert is_factorisable(v)

    def test_mixtures(self):
        b = canonical_behavior(Family.CASE1)
        assert mix([b], [1.0]) == b
        for q in (0.0, 0.3, 1.0):
            m = mix([pr_box(1), local_deterministic(1)], [q, 1 - q])
            assert witness_value(m, "CHSH").value == pytest.approx(2 * q + 2)
        m = mix([pr_box(1), local_deterministic(4)], [0.5, 0.5])
        r = witness_value(m, "Hardy")
        assert r.value == pytest.approx(0.25) and r.exact

    def test_chsh_from_hardy_point(self):
        assert chsh_from_witness_probs(HARDY_MAX, 0, 0, 0) == pytest.approx(10 * (SQRT5 - 2))
        assert chsh_from_witness_probs(0, 0, 0, 0) == 2.0

    def test_factorisable(self):
        assert not is_factorisable(pr_box(1))
        b = Behavior.product([0.3, 0.7], [0.6, 0.4])
        assert is_factorisable(b)


class TestQuantumExamples:
    def test_singlet_anticorrelation(self):
        params = [0.7, 0.0, 0.7, 0.0, 1.1, 0.0, 1.1, 0.0, 1 / SQRT2]
        _, _, axby = correlators_from_params(params, -1)
        assert axby[0, 0] == pytest.approx(-1.0, abs=1e-14)

    def test_cl_row_settings(self):
        b = behavior_from_params(CL_ROW2, -1)
        assert witness_value(b, "CL").value == pytest.approx(0.1078, abs=1e-3)
        c = b.correlators()
        np.testing.assert_allclose(c.ax, MAX_CL_PRINTED.ax, atol=1e-3)
        np.testing.assert_allclose(c.by, MAX_CL_PRINTED.by, atol=1e-3)
        np.testing.assert_allclose(c.axby, MAX_CL_PRINTED.axby, atol=1e-3)

    def test_hardy_row_settings(self):
        b = behavior_from_params(HARDY_ROW1, -1)
        assert witness_value(b, "Hardy").value == pytest.approx(0.0640, abs=1e-4)
        best = max(min_entropy(b, x, y) for x in (0, 1) for y in (0, 1))
        assert best == pytest.approx(1.6787, abs=5e-3)

    def test_case2_degenerates_to_case1_value(self):
        c = canonical_correlators(TiltedFamilyParams(Family.CASE2, t=1.0, theta=math.pi / 4))
        assert c.chsh() == pytest.approx(2 * SQRT2)

    def test_case3_minimiser_on_family(self):
        b_star = case_minimizer("Q_Case3_Varying")
        assert b_star == pytest.approx(2.2372, abs=1e-4)
        # the family reaches that CHSH value inside its parameter range
        thetas = np.linspace(0.01, math.pi / 4, 400)
        vals = [canonical_correlators(TiltedFamilyParams(Family.CASE3, theta=t)).chsh() for t in thetas]
        assert min(vals) <= b_star <= max(vals)

    def test_max_hardy_correlators(self):
        c = canonical_correlators(Family.MAX_HARDY)
        assert c.ax[0] == pytest.approx(5 - 2 * SQRT5)
        assert c.axby[0, 0] == pytest.approx(6 * SQRT5 - 13)

    def test_chsh_maximum(self):
        assert maximize_witness("CHSH", starts=5, seed=1, alpha=1 / SQRT2).best_value == pytest.approx(2 * SQRT2, abs=1e-6)

    @pytest.mark.parametrize("alpha", [0.0, 1.0])
    def test_product_states(self, alpha):
        assert maximize_witness("Hardy", starts=5, seed=1, alpha=alpha).best_value == pytest.approx(0.0, abs=1e-6)


class TestBoundExamples:
    def test_ns(self):
        assert guaranteed_bound("NS", WitnessSpec(WitnessKind.CHSH, 4.0)) == pytest.approx(1.0)
        assert guaranteed_bound("NS", WitnessSpec(WitnessKind.HARDY, 0.0)) == 0.0
        b = guaranteed_bound("NS", WitnessSpec(WitnessKind.CHSH, 2 * SQRT2))
        assert b == pytest.approx(-math.log2(1.5 - SQRT2 / 2), abs=1e-14)
        assert round(b, 3) == 0.335

    def test_case2_fixed_large_t(self):
        b_ext = canonical_correlators(TiltedFamilyParams(Family.CASE2, t=1e4, theta=math.pi / 4)).chsh()
        assert guaranteed_bound("Q_Case2_Fixed", WitnessSpec(WitnessKind.CHSH, b_ext)) == pytest.approx(1.0, abs=1e-3)

    def test_hardy_convex_endpoint(self):
        v = guaranteed_bound("Hardy_Convex", WitnessSpec(WitnessKind.HARDY, HARDY_MAX))
        assert v == pytest.approx(-math.log2((SQRT5 - 1) / 2), abs=1e-14)
        assert v == pytest.approx(0.6942, abs=5e-5)

    def test_minimisers(self):
        assert case_minimizer("Q_Case2_Varying") == pytest.approx(2.8185, abs=1e-4)
        assert case_minimizer("Q_Case3_Varying") == pytest.approx(2.2372, abs=1e-4)

    def test_mixture(self):
        assert guessing_from_mixture(0.5, 0.4) == pytest.approx(0.8)
        assert guessing_from_mixture(0.37, 0.0) == 1.0
        assert guessing_from_mixture(0.6410, 1.0) == pytest.approx(0.6410)

    @pytest.mark.parametrize("model", [m for m in BoundModel if m is not BoundModel.Q_CASE2_FIXED])
    def test_local_boundary(self, model):
        for kind in model.kinds:
            lo, _ = bound_domain(model, kind)
            edge = 2.0 if kind is WitnessKind.CHSH and lo == 2.0 else lo
            assert guaranteed_bound(model, WitnessSpec(kind, edge + 1e-12)) == pytest.approx(0.0, abs=1e-9)


class TestSdpExamples:
    def test_functionals_normalised(self):
        mm = moment_matrix("L1ab")
        y = moments_from_behavior(mm, canonical_correlators(Family.CASE1))
        for x in (0, 1):
            for yy in (0, 1):
                total = sum(probability_functional(mm, a, b, x, yy)(y) for a in (1, -1) for b in (1, -1))
                assert total == pytest.approx(1.0)

    def test_functionals_case1(self):
        mm = moment_matrix("L1")
        y = moments_from_behavior(mm, canonical_correlators(Family.CASE1))
        vals = [probability_functional(mm, a, b, x, yy)(y) for x in (0, 1) for yy in (0, 1) for a in (1, -1) for b in (1, -1)]
        assert max(vals) == pytest.approx(CASE1_PMAX)

    def test_functionals_pr_box(self):
        mm = moment_matrix("L1")
        y = moments_from_behavior(mm, pr_box(1).correlators())
        vals = [probability_functional(mm, a, b, x, yy)(y) for x in (0, 1) for yy in (0, 1) for a in (1, -1) for b in (1, -1)]
        np.testing.assert_allclose(vals, pr_box(1).probs, atol=1e-15)

    def test_chsh_l0(self):
        assert ns_lp(_chsh_row()) == pytest.approx(4.0)
        assert solve_functional(Level.L1, _chsh_row()).value == pytest.approx(2 * SQRT2, abs=1e-6)

    def test_lp_examples(self):
        for p in (0.01, 0.2, 0.45):
            cons = witness_constraints(WitnessSpec(WitnessKind.HARDY, p))
            assert ns_lp(np.eye(16), cons).max() == pytest.approx(1 - p)
        assert ns_lp(np.eye(16), witness_constraints(WitnessSpec(WitnessKind.CHSH, 4.0))).max() == pytest.approx(0.5)
        assert ns_lp(np.eye(16)[5]) == pytest.approx(1.0)


class TestCliExamples:
    def test_compare_chain(self):
        buf = io.StringIO()
        assert main(["compare", "--value", "2.2", "--format", "json"], stdout=buf) == 0
        row = json.loads(buf.getvalue())["rows"][0]
        assert row["bits_hardy"] + 1e-6 >= row["bits_cl"] >= row["bits_chsh"] - 1e-6

    def test_rounded_columns(self):
        buf = io.StringIO()
        main(["curve", "--witness", "CHSH", "--model", "NS", "--value", "2", "4"], stdout=buf)
        body = [line for line in buf.getvalue().splitlines() if not line.startswith("#")]
        assert body[1].split(",")[2] == "0.0000"
        assert body[2].split(",")[2] == "1.0000"

    def test_iteration_cap_surfaces(self):
        buf = io.StringIO()
        assert main(["verify", "--criteria", "5", "6", "--sdp-max-iter", "1"], stdout=buf) == 1
        details = [c["detail"] for c in json.loads(buf.getvalue())["criteria"]]
        assert all("MaxIter" in d for d in details)
