"""
Tests for the normalized Legendre basis
"""
import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings, strategies as st
from numpy.testing import assert_allclose

from app.errors import BasisSizeError, DimensionMismatchError, DomainError
from app.services.legendre_basis import (
    BasisConfig,
    design_matrix,
    enumerate_basis,
    eval_psi,
    eval_tensor,
    gauss_legendre,
    psi_table,
    support,
)


class TestEvalPsi:
    """psi_n(x) = sqrt(2n+1) P_n(x)"""

    @pytest.mark.parametrize("n, x, expected", [
        (0, 0.37, 1.0),
        (1, 0.5, 0.8660254037844386),
        (2, 1.0, 2.23606797749979),
        (3, -1.0, -np.sqrt(7.0)),
    ])
    def test_examples(self, n, x, expected):
        assert_allclose(eval_psi(n, x), expected, rtol=0, atol=1e-12)

    def test_orthonormal_under_gauss_legendre(self):
        nodes, weights = gauss_legendre(10)
        table = psi_table(nodes, 4)
        gram = (table * weights[:, None]).T @ table
        assert_allclose(gram, np.eye(5), rtol=0, atol=1e-10)

    def test_weights_are_a_probability_measure(self):
        _, weights = gauss_legendre(7)
        assert_allclose(weights.sum(), 1.0, atol=1e-14)

    @pytest.mark.parametrize("n", range(7))
    def test_recurrence_matches_monomial_expansion(self, n):
        grid = np.linspace(-1.0, 1.0, 101)
        unit = np.zeros(n + 1)
        unit[n] = 1.0
        monomial = np.polynomial.legendre.leg2poly(unit)
        direct = np.sqrt(2 * n + 1) * np.polynomial.polynomial.polyval(grid, monomial)
        assert_allclose(eval_psi(n, grid), direct, rtol=0, atol=1e-10)

    def test_vectorized_shape(self):
        x = np.zeros((4, 3))
        assert psi_table(x, 2).shape == (4, 3, 3)

    @pytest.mark.parametrize("x", [1.5, -1.0001, np.array([0.0, 2.0])])
    def test_outside_domain_raises(self, x):
        with pytest.raises(DomainError):
            eval_psi(1, x)

    def test_endpoint_slack_accepted(self):
        assert_allclose(eval_psi(1, 1.0 + 1e-13), np.sqrt(3.0), atol=1e-10)

    def test_negative_degree_rejected(self):
        with pytest.raises(ValueError):
            eval_psi(-1, 0.0)


class TestEvalTensor:
    @pytest.mark.parametrize("k, x, expected", [
        ((0, 0, 0), (0.1, -0.2, 0.9), 1.0),
        ((1, 0, 0), (0.5, -1.0, 1.0), 0.8660254037844386),
        ((1, 1, 0), (0.5, 0.5, 0.0), 0.75),
    ])
    def test_examples(self, k, x, expected):
        assert_allclose(eval_tensor(k, np.array(x)), expected, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            eval_tensor((1, 0), np.array([0.1, 0.2, 0.3]))

    def test_outside_domain(self):
        with pytest.raises(DomainError):
            eval_tensor((1, 0), np.array([0.1, 1.2]))

    @hyp_settings(max_examples=60, deadline=None)
    @given(
        st.integers(min_value=1, max_value=4).flatmap(
            lambda d: st.tuples(
                st.lists(st.integers(min_value=0, max_value=5), min_size=d, max_size=d),
                st.lists(st.floats(min_value=-1.0, max_value=1.0), min_size=d, max_size=d),
            )
        )
    )
    def test_factorizes_over_coordinates(self, case):
        k, x = case
        expected = np.prod([eval_psi(deg, xi) for deg, xi in zip(k, x)])
        assert_allclose(eval_tensor(tuple(k), np.array(x)), expected, rtol=1e-12, atol=1e-12)


class TestEnumerateBasis:
    def test_d1(self):
        assert enumerate_basis(BasisConfig(d=1, D=2)) == ((0,), (1,), (2,))

    def test_lexicographic(self):
        assert enumerate_basis(BasisConfig(d=2, D=1)) == ((0, 0), (0, 1), (1, 0), (1, 1))

    def test_size(self, cfg3):
        basis = enumerate_basis(cfg3)
        assert len(basis) == 125 == cfg3.size
        assert basis[0] == (0, 0, 0)
        assert len(set(basis)) == 125

    def test_cap(self):
        with pytest.raises(BasisSizeError):
            enumerate_basis(BasisConfig(d=10, D=4), cap=1000)

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            BasisConfig(d=0, D=4)


class TestSupportAndDesign:
    def test_support_is_one_based(self):
        assert support((0, 2, 1)) == frozenset({2, 3})
        assert support((0, 0)) == frozenset()

    def test_design_matrix_matches_eval_tensor(self, rng):
        cfg = BasisConfig(d=2, D=3)
        points = rng.uniform(-1, 1, size=(5, 2))
        Psi = design_matrix(points, cfg)
        assert Psi.shape == (5, 16)
        for i, x in enumerate(points):
            expected = [eval_tensor(k, x) for k in enumerate_basis(cfg)]
            assert_allclose(Psi[i], expected, atol=1e-12)

    def test_design_matrix_dimension_check(self, cfg3):
        with pytest.raises(DimensionMismatchError):
            design_matrix(np.zeros((2, 2)), cfg3)
