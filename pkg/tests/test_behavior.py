import math

import numpy as np
import pytest

from randcert.behavior import (
    Behavior,
    CorrelatorSet,
    InvalidBehaviorError,
    WitnessKind,
    WitnessSpec,
    behavior_from_correlators,
    chsh_from_witness_probs,
    flat_index,
    guessing_probability,
    hardy_probs,
    is_factorisable,
    min_entropy,
    mix,
    witness_value,
)
from randcert.vertices import catalog, local_deterministic, pr_box


class TestLayout:
    def test_flat_index(self):
        assert flat_index(0, 0, 1, 1) == 0
        assert flat_index(0, 0, -1, -1) == 3
        assert flat_index(1, 1, 1, 1) == 12
        assert flat_index(1, 0, -1, 1) == 10
        assert sorted(flat_index(x, y, a, b) for x in (0, 1) for y in (0, 1) for a in (1, -1) for b in (1, -1)) == list(range(16))

    def test_dict_roundtrip(self):
        b = pr_box(1)
        np.testing.assert_array_equal(Behavior.from_json(b.to_json()).probs, b.probs)

    def test_read_only(self):
        b = Behavior.uniform()
        with pytest.raises(ValueError):
            b.probs[0] = 1.0


class TestValidation:
    def test_normalization(self):
        p = np.full(16, 0.25)
        p[0] += 1e-9
        with pytest.raises(InvalidBehaviorError):
            Behavior(p)

    def test_negative(self):
        p = np.full(16, 0.25)
        p[0], p[1] = -0.1, 0.6
        with pytest.raises(InvalidBehaviorError):
            Behavior(p)

    def test_signalling(self):
        t = np.zeros((2, 2, 2, 2))
        t[0, 0, 0, 0] = t[0, 1, 1, 1] = 1.0
        t[1, :, 0, 0] = 1.0
        with pytest.raises(InvalidBehaviorError):
            Behavior(t.reshape(16))

    def test_mix_weights(self):
        with pytest.raises(ValueError):
            mix([pr_box(1), pr_box(2)], [0.7, 0.7])
        with pytest.raises(ValueError):
            mix([pr_box(1)], [-1.0])


class TestWitnesses:
    def test_pr1_anchor(self):
        b = pr_box(1)
        assert witness_value(b, "CHSH").value == pytest.approx(4.0)
        assert witness_value(b, "Hardy").value == pytest.approx(0.5)
        assert witness_value(b, "CL").value == pytest.approx(0.5)
        assert witness_value(b, WitnessKind.HARDY).exact

    def test_residuals_reported(self):
        r = witness_value(Behavior.uniform(), "Hardy")
        assert not r.exact
        assert r.max_residual == pytest.approx(0.25)

    def test_chsh_identity(self, rng):
        V = catalog().matrix()
        for w in rng.dirichlet(np.full(24, 0.3), size=50):
            b = Behavior(np.clip(w @ V, 0, 1))
            assert witness_value(b, "CHSH").value == pytest.approx(chsh_from_witness_probs(*hardy_probs(b)), abs=1e-12)

    def test_spec_range(self):
        with pytest.raises(ValueError):
            WitnessSpec(WitnessKind.HARDY, 0.6)
        with pytest.raises(ValueError):
            WitnessKind.parse("bell")


class TestEntropy:
    def test_uniform(self):
        b = Behavior.uniform()
        assert min_entropy(b, 1, 0) == pytest.approx(2.0)
        assert guessing_probability(b) == (0.25, (0, 0, 1, 1))

    def test_deterministic(self):
        b = local_deterministic(4)
        assert guessing_probability(b)[0] == 1.0
        assert min_entropy(b, 0, 0) == 0.0

    def test_product(self):
        b = Behavior.product([0.3, 0.5], [0.2, 0.9])
        assert is_factorisable(b)
        assert not is_factorisable(pr_box(1))


class TestCorrelators:
    def test_roundtrip(self, rng):
        V = catalog().matrix()
        b = Behavior(np.clip(rng.dirichlet(np.ones(24)) @ V, 0, 1))
        np.testing.assert_allclose(behavior_from_correlators(b.correlators()).probs, b.probs, atol=1e-14)

    def test_tsirelson(self):
        r = 1 / math.sqrt(2)
        c = CorrelatorSet([0, 0], [0, 0], [[r, r], [r, -r]])
        assert c.chsh() == pytest.approx(2 * math.sqrt(2))
