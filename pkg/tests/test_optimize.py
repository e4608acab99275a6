import math

import numpy as np
import pytest

from randcert.behavior import Behavior, CorrelatorSet, WitnessKind, WitnessSpec, mix
from randcert.bounds import max_cl_correlators
from randcert.optimize import (
    AugLagOptions,
    Constraint,
    augmented_lagrangian,
    extremal_scan,
    extremality_check,
    face_weights,
    max_dd_randomness,
    maximize_witness,
    multistart_driver,
    scan_vertices,
    slsqp_polish,
    sobol_starts,
    write_scan_csv,
)
from randcert.quantum import HARDY_MAX, Family, TiltedFamilyParams, canonical_behavior, canonical_correlators
from randcert.vertices import local_deterministic

MAX_CL = 0.1078127177489365
# frozen from high-start runs of the device-dependent optimiser
DD_HARDY_0640 = 1.67836
DD_CL_0700 = 1.80008
DD_CL_0050 = 1.98571


def _disk():
    """min x + y on the unit disk, optimum -sqrt(2)."""

    def obj(z):
        return float(z[0] + z[1]), np.ones(2)

    def ineq(z):
        return np.array([z @ z - 1.0]), 2 * z[None, :]

    return obj, [Constraint(ineq, "ineq")]


def _line():
    def obj(z):
        return float(z @ z), 2 * z

    def eq(z):
        return np.array([z[0] + 2 * z[1] - 1.0]), np.array([[1.0, 2.0]])

    return obj, [Constraint(eq)]


class TestAugLag:
    def test_equality(self):
        obj, cons = _line()
        r = augmented_lagrangian(obj, cons, np.array([3.0, -1.0]), [(-5, 5), (-5, 5)])
        np.testing.assert_allclose(r.x, [0.2, 0.4], atol=1e-7)
        assert r.converged

    def test_inequality(self):
        obj, cons = _disk()
        r = augmented_lagrangian(obj, cons, np.array([0.5, 0.1]), [(-2, 2), (-2, 2)])
        assert r.value == pytest.approx(-math.sqrt(2), abs=1e-7)

    def test_slsqp(self):
        obj, cons = _disk()
        r = slsqp_polish(obj, cons, np.array([-0.6, -0.7]), [(-2, 2), (-2, 2)])
        np.testing.assert_allclose(r.x, [-1 / math.sqrt(2)] * 2, atol=1e-9)
        assert r.converged

    def test_bad_kind(self):
        with pytest.raises(ValueError):
            Constraint(lambda z: (z, np.eye(2)), "le")

    def test_sobol(self):
        a = sobol_starts([0, 0], [1, 2], 10, seed=3)
        np.testing.assert_array_equal(a, sobol_starts([0, 0], [1, 2], 10, seed=3))
        assert a.shape == (10, 2)
        assert np.all((a >= 0) & (a <= [1, 2]))

    def test_driver_fixed_coordinate(self):
        obj, cons = _line()
        out = multistart_driver(obj, cons, ([0.5, -5], [0.5, 5]), starts=4, seed=0)
        np.testing.assert_allclose(out.params, [0.5, 0.25], atol=1e-7)

    def test_driver_deterministic(self):
        obj, cons = _disk()
        a = multistart_driver(obj, cons, ([-2, -2], [2, 2]), starts=8, seed=5, options=AugLagOptions(max_outer=20))
        b = multistart_driver(obj, cons, ([-2, -2], [2, 2]), starts=8, seed=5, options=AugLagOptions(max_outer=20))
        np.testing.assert_array_equal(a.params, b.params)


class TestWitnessMaximum:
    def test_hardy(self):
        out = maximize_witness("Hardy", starts=10, seed=1)
        assert out.best_value == pytest.approx(HARDY_MAX, abs=1e-12)
        assert out.max_residual < 1e-12

    def test_cl(self):
        out = maximize_witness("CL", starts=20, seed=1)
        assert out.best_value == pytest.approx(MAX_CL, abs=1e-12)

    def test_maximally_entangled(self):
        out = maximize_witness("CL", starts=10, seed=1, alpha=1 / math.sqrt(2))
        assert out.best_value < 1e-4


class TestDeviceDependent:
    def test_hardy(self):
        out = max_dd_randomness(WitnessSpec(WitnessKind.HARDY, 0.064), starts=10, seed=1)
        assert out.best_value == pytest.approx(DD_HARDY_0640, abs=1e-4)
        assert out.max_residual < 1e-10
        assert out.extra["witness_value"] == pytest.approx(0.064, abs=1e-10)

    def test_cl(self):
        out = max_dd_randomness(WitnessSpec(WitnessKind.CL, 0.070), starts=10, seed=1)
        assert out.best_value == pytest.approx(DD_CL_0700, abs=1e-4)

    def test_cl_near_two_bits(self):
        out = max_dd_randomness(WitnessSpec(WitnessKind.CL, 0.002), starts=10, seed=1)
        assert out.best_value >= 1.99
        assert 0.6808 <= out.params[8] <= 0.7239

    def test_cl_0050(self):
        out = max_dd_randomness(WitnessSpec(WitnessKind.CL, 0.005), starts=10, seed=1)
        assert out.best_value == pytest.approx(DD_CL_0050, abs=1e-4)
        assert 0.6808 <= out.params[8] <= 0.7239

    def test_chsh_rejected(self):
        with pytest.raises(ValueError):
            max_dd_randomness(WitnessSpec(WitnessKind.CHSH, 2.5))


class TestExtremality:
    def test_known_extremal(self):
        for c in (canonical_correlators(Family.CASE1), canonical_correlators(Family.MAX_HARDY), max_cl_correlators()):
            assert extremality_check(c).passes

    def test_case3_family(self):
        for theta in (0.2, 0.5, math.pi / 4):
            assert extremality_check(canonical_correlators(TiltedFamilyParams(Family.CASE3, theta=theta))).passes

    def test_noisy_mixture_fails(self):
        b = mix([canonical_behavior(Family.CASE1), Behavior.uniform()], [0.9, 0.1])
        assert extremality_check(b.correlators()).passes is False

    def test_deterministic_extremal(self):
        assert extremality_check(local_deterministic(1).correlators()).passes

    def test_degenerate(self):
        # unbiased Alice against a deterministic Bob gives d_x = 0
        c = CorrelatorSet(ax=[0.0, 0.0], by=[1.0, 1.0], axby=[[0.0, 0.0], [0.0, 0.0]])
        assert extremality_check(c).degenerate


class TestScan:
    def test_face_weights(self, rng):
        V = np.stack([v.probs for v in scan_vertices("Hardy")])
        w = rng.dirichlet(np.ones(len(V)))
        np.testing.assert_allclose(face_weights(w @ V, "Hardy") @ V, w @ V, atol=1e-12)

    def test_scan_vertices(self):
        assert len(scan_vertices("Hardy")) == 6
        assert len(scan_vertices("CL")) == 10
        with pytest.raises(ValueError):
            scan_vertices("CHSH")

    def test_hardy_scan(self):
        pts = extremal_scan("Hardy", samples=40, seed=0, refine=3)
        assert pts
        best = max(pts, key=lambda p: p.r_max_bits)
        assert best.r_max_bits == pytest.approx(1.68058, abs=1e-3)
        for p in pts:
            assert abs(p.equality_residual) <= 1e-4
            assert 0 < p.witness_value <= HARDY_MAX + 1e-9
            assert p.r_guaranteed_bits <= p.r_max_bits + 1e-12

    def test_csv(self):
        pts = extremal_scan("Hardy", samples=8, seed=0, refine=0)
        lines = write_scan_csv(pts, "Hardy").splitlines()
        assert lines[0].startswith("witness_value,r_max_bits,r_guaranteed_bits,w0")
        assert len(lines) == len(pts) + 1
