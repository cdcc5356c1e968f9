import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from platelab.errors import ConvexityViolation, NonPositiveLeadingCoefficient
from platelab.tensors import (
    Dichotomy,
    ElasticityTensor,
    PlateTensor,
    RegionTensor,
    SymbolQuartic,
    TensorField,
    classify_dichotomy,
    convexity_margin,
    det_full_pivot,
    dichotomy_determinant,
    dichotomy_matrix,
    dichotomy_value,
    make_isotropic,
    symbol_coefficients,
)
from tests.oracles import resultant_via_roots, sylvester_det_exact

ORTHOTROPIC = ElasticityTensor(1.0, 0.0, 0.0, 0.0, 0.5, 4.0)


class TestElasticityTensor:
    @pytest.mark.parametrize("lam,mu,expected", [
        (1.0, 1.0, (3, 1, 0, 0, 1, 3)),
        (0.0, 0.5, (1, 0, 0, 0, 0.5, 1)),
    ])
    def test_isotropic_coefficients(self, lam, mu, expected):
        np.testing.assert_array_equal(make_isotropic(lam, mu).as_array(), expected)

    def test_zero_shear_modulus_rejected(self):
        with pytest.raises(ConvexityViolation):
            make_isotropic(1.0, 0.0)

    def test_components_have_major_and_minor_symmetry(self):
        c = ElasticityTensor(2, 1, 0.1, 0.2, 1, 3).components()
        np.testing.assert_array_equal(c, c.transpose(1, 0, 2, 3))
        np.testing.assert_array_equal(c, c.transpose(0, 1, 3, 2))
        np.testing.assert_array_equal(c, c.transpose(2, 3, 0, 1))

    def test_mandel_quadratic_form_matches_contraction(self, rng):
        t = ElasticityTensor(2, 1, 0.1, 0.2, 1, 3)
        for _ in range(5):
            a = rng.normal(size=(2, 2))
            a = a + a.T
            v = np.array([a[0, 0], a[1, 1], np.sqrt(2) * a[0, 1]])
            assert v @ t.mandel() @ v == pytest.approx(np.sum(t.apply(a) * a), rel=1e-13)

    def test_plate_factor(self):
        p = PlateTensor(make_isotropic(1, 1), 2.0)
        np.testing.assert_allclose(p.coefficients(), 8 / 12 * np.array([3, 1, 0, 0, 1, 3]))


class TestConvexity:
    @pytest.mark.parametrize("t,gamma", [
        (ElasticityTensor(1, 0, 0, 0, 0.5, 1), 1.0),
        (make_isotropic(1, 1), 2.0),
        (ORTHOTROPIC, 1.0),
    ])
    def test_margin(self, t, gamma):
        assert convexity_margin(t) == pytest.approx(gamma, abs=1e-14)

    def test_orthotropic_margin_matches_dense_eigensolve(self):
        m = np.diag([1.0, 4.0, 1.0])
        assert convexity_margin(ORTHOTROPIC) == pytest.approx(np.linalg.eigvalsh(m).min())

    @given(lam=st.floats(-0.9, 5), mu=st.floats(0.05, 5))
    def test_isotropic_margin_formula(self, lam, mu):
        if lam + mu <= 1e-6:
            return
        assert convexity_margin(make_isotropic(lam, mu)) == pytest.approx(min(2 * mu, 2 * lam + 2 * mu), rel=1e-9)


class TestSymbol:
    @pytest.mark.parametrize("t,q", [
        (make_isotropic(1, 1), (3, 0, 6, 0, 3)),
        (ORTHOTROPIC, (1, 0, 2, 0, 4)),
        (ElasticityTensor(2, 1, 0.1, 0.2, 1, 3), (2, 0.4, 6, 0.8, 3)),
    ])
    def test_symbol_coefficients(self, t, q):
        np.testing.assert_allclose(symbol_coefficients(t).as_array(), q, rtol=1e-15)

    def test_matrix_layout(self):
        s = dichotomy_matrix((1, 2, 3, 4, 5))
        np.testing.assert_array_equal(s[0], [1, 2, 3, 4, 5, 0, 0])
        np.testing.assert_array_equal(s[6], [0, 0, 0, 4, 6, 6, 4])


class TestDichotomyValue:
    @pytest.mark.parametrize("q", [(3, 0, 6, 0, 3), (1, 0, 0, 0, 0)])
    def test_repeated_roots_give_zero(self, q):
        det, smax = dichotomy_determinant(q)
        assert abs(det) <= 1e-9 * smax**7
        assert sylvester_det_exact(q) == 0

    def test_orthotropic_positive_matches_exact_oracle(self):
        q = (1, 0, 2, 0, 4)
        exact = abs(float(sylvester_det_exact(q))) / q[0]
        assert exact > 0
        assert dichotomy_value(q) == pytest.approx(exact, rel=1e-12)
        assert dichotomy_value(q) == pytest.approx(resultant_via_roots(q), rel=1e-9)

    def test_full_pivot_det_matches_numpy(self, rng):
        a = rng.normal(size=(7, 7))
        assert det_full_pivot(a) == pytest.approx(np.linalg.det(a), rel=1e-12)

    def test_leading_coefficient_must_be_positive(self):
        with pytest.raises(NonPositiveLeadingCoefficient):
            dichotomy_value((0, 1, 1, 1, 1))

    @settings(max_examples=40)
    @given(r=st.floats(-3, 3), p=st.floats(-3, 3), c=st.floats(-3, 3), a0=st.floats(0.1, 5))
    def test_constructed_repeated_root(self, r, p, c, a0):
        q = a0 * np.polymul(np.polymul([1, -r], [1, -r]), [1, p, c])
        det, smax = dichotomy_determinant(q)
        assert abs(det) <= 1e-9 * smax**7

    @settings(max_examples=40)
    @given(s=st.floats(0.1, 10))
    def test_scaling_homogeneity(self, s):
        q = np.array([2, 0.4, 6, 0.8, 3])
        # det S is homogeneous of degree 7, a0 of degree 1
        assert dichotomy_value(s * q) == pytest.approx(s**6 * dichotomy_value(q), rel=1e-10)


class TestClassify:
    def test_isotropic_field_zero_everywhere(self, rng):
        pts = rng.uniform(-1, 1, (25, 2))
        rep = classify_dichotomy(make_isotropic(1, 1), pts)
        assert rep.classification is Dichotomy.ZERO
        assert np.all(np.abs(rep.determinants) <= 1e-9 * 6.0**7)
        assert "finite" in rep.sampling_note

    def test_orthotropic_positive_with_delta(self, rng):
        rep = classify_dichotomy(ORTHOTROPIC, rng.uniform(0, 1, (10, 2)))
        assert rep.classification is Dichotomy.POSITIVE
        assert rep.delta1 == pytest.approx(dichotomy_value((1, 0, 2, 0, 4)), rel=1e-14)

    def test_blend_is_violated(self):
        field = TensorField.blend(make_isotropic(1, 1), ORTHOTROPIC, lambda p: p[:, 0])
        pts = np.c_[np.linspace(0, 1, 11), np.zeros(11)]
        rep = classify_dichotomy(field, pts)
        assert rep.classification is Dichotomy.VIOLATED
        assert len(rep.offending_points) >= 1

    def test_region_tensor(self):
        rt = RegionTensor({0: make_isotropic(1, 1), 1: ORTHOTROPIC})
        rep = classify_dichotomy(rt, np.zeros((2, 2)), regions=np.array([0, 1]))
        assert rep.classification is Dichotomy.VIOLATED

    def test_csv_rows(self):
        rep = classify_dichotomy(ORTHOTROPIC, np.array([[0.5, 0.5]]))
        (row,) = list(rep.csv_rows())
        assert len(row) == len(rep.csv_header) and row[-1] == "PositiveEverywhere"

    def test_symbol_quartic_scaled(self):
        assert SymbolQuartic(1, 0, 2, 0, 4).scaled(2).a4 == 8
