import numpy as np
import pytest

from randcert.behavior import hardy_probs, witness_value
from randcert.vertices import CL_LD, HARDY_LD, catalog, local_deterministic, pr_box


class TestCatalog:
    def test_counts(self):
        cat = catalog()
        assert len(cat.pr) == 8 and len(cat.ld) == 16
        assert cat.matrix().shape == (24, 16)

    def test_distinct(self):
        assert len({v for v in catalog().all()}) == 24

    def test_ld_deterministic(self):
        for v in catalog().ld:
            np.testing.assert_array_equal(np.sort(v.table.reshape(4, 4).max(axis=1)), np.ones(4))

    def test_pr_correlators(self):
        # each PR box has unbiased marginals and perfect correlators with an odd number of -1
        for v in catalog().pr:
            c = v.correlators()
            np.testing.assert_allclose(c.ax, 0.0)
            np.testing.assert_allclose(c.by, 0.0)
            np.testing.assert_allclose(np.abs(c.axby), 1.0)
            assert np.prod(c.axby) == pytest.approx(-1.0)

    def test_pr1_chsh(self):
        assert witness_value(pr_box(1), "CHSH").value == pytest.approx(4.0)

    def test_bad_index(self):
        with pytest.raises(KeyError):
            pr_box(9)


class TestFaces:
    @pytest.mark.parametrize("n", HARDY_LD)
    def test_hardy_zeros(self, n):
        _, p2, p3, p4 = hardy_probs(local_deterministic(n))
        assert p2 == p3 == p4 == 0.0

    @pytest.mark.parametrize("n", CL_LD)
    def test_cl_zeros(self, n):
        _, p2, p3, _ = hardy_probs(local_deterministic(n))
        assert p2 == p3 == 0.0

    def test_face_complete(self):
        hardy = {n for n in range(1, 17) if hardy_probs(local_deterministic(n))[1:] == (0, 0, 0)}
        cl = {n for n in range(1, 17) if hardy_probs(local_deterministic(n))[1:3] == (0, 0)}
        assert hardy == set(HARDY_LD)
        assert cl == set(CL_LD)
