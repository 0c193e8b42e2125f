import math

import numpy as np
import pytest

from bandclique import (
    GramMatrix,
    InputError,
    ParameterError,
    coherence,
    gaussian_kernel,
    gram_matrix,
    gram_power,
    random_endmembers,
)


class TestGaussianKernel:
    def test_zero_distance_is_one(self):
        x = np.array([0.3, 0.7, 0.1])
        assert gaussian_kernel(x, x, 0.5) == 1.0
        assert gaussian_kernel(x, x, 123.0) == 1.0

    def test_analytic_exponent_minus_one(self):
        # ||x - y||^2 == 2 sigma2  ->  exp(-1)
        x, y = np.array([0.0, 0.0]), np.array([1.0, 1.0])  # d2 = 2
        assert gaussian_kernel(x, y, 1.0) == pytest.approx(math.exp(-1.0), abs=1e-15)

    def test_quarter_value(self):
        # d2 = 2 with sigma2 = 1/ln(4) -> exp(-ln 4) = 1/4
        x, y = np.array([0.0]), np.array([math.sqrt(2.0)])
        assert gaussian_kernel(x, y, 1.0 / math.log(4.0)) == pytest.approx(0.25, abs=1e-15)

    def test_parameter_errors(self):
        x = np.array([1.0, 2.0])
        with pytest.raises(ParameterError):
            gaussian_kernel(x, x, 0.0)
        with pytest.raises(ParameterError):
            gaussian_kernel(x, x, -1.0)
        with pytest.raises(InputError):
            gaussian_kernel(np.array([np.nan, 0.0]), x, 1.0)
        with pytest.raises(InputError):
            gaussian_kernel(np.array([1.0]), x, 1.0)


class TestGramMatrix:
    def test_identical_rows_all_ones(self):
        M = np.array([[0.2, 0.8], [0.2, 0.8]])
        K = gram_matrix(M, 3.0)
        np.testing.assert_array_equal(K.values, np.ones((2, 2)))

    def test_unit_basis_rows(self):
        M = np.eye(2)  # rows e1, e2, squared distance 2
        K = gram_matrix(M, 1.0)
        assert K.values[0, 1] == pytest.approx(math.exp(-1.0), abs=1e-15)

    def test_matches_elementwise_kernel(self):
        rng = np.random.default_rng(42)
        M = rng.random((6, 3))
        K = gram_matrix(M, 0.7)
        for i in range(6):
            for j in range(6):
                assert K.values[i, j] == pytest.approx(
                    gaussian_kernel(M[i], M[j], 0.7), abs=1e-14
                )

    def test_invariants_on_random_data(self):
        M = random_endmembers(40, 4, seed=7)
        K = gram_matrix(M, 1.0)
        assert np.array_equal(K.values, K.values.T)
        assert np.all(np.diag(K.values) == 1.0)
        assert np.all(K.values > 0.0)
        assert np.all(K.values <= 1.0)

    def test_rejects_bad_sigma(self):
        with pytest.raises(ParameterError):
            gram_matrix(np.eye(3), -2.0)

    def test_constructor_validation(self):
        with pytest.raises(InputError):
            GramMatrix(np.array([[1.0, 0.5], [0.4, 1.0]]), 1.0)  # asymmetric
        with pytest.raises(InputError):
            GramMatrix(np.array([[0.9, 0.1], [0.1, 0.9]]), 1.0)  # diagonal
        with pytest.raises(InputError):
            GramMatrix(np.array([[1.0, 1.5], [1.5, 1.0]]), 1.0)  # out of range


class TestGramPower:
    def test_exponent_one_is_identity(self):
        M = random_endmembers(15, 3, seed=0)
        K1 = gram_matrix(M, 1.0)
        np.testing.assert_array_equal(gram_power(K1, 1.0).values, K1.values)

    def test_power_law(self):
        c = 0.6
        V = np.array([[1.0, c], [c, 1.0]])
        K1 = GramMatrix(V, 1.0)
        assert gram_power(K1, 0.5).values[0, 1] == pytest.approx(c * c, abs=1e-15)

    @pytest.mark.parametrize("s", [0.1, 0.5, 1.0, 2.0, 10.0])
    def test_agrees_with_rebuilt_gram(self, s):
        rng = np.random.default_rng(5)
        M = rng.random((25, 4))
        K1 = gram_matrix(M, 1.0)
        np.testing.assert_allclose(
            gram_power(K1, s).values, gram_matrix(M, s).values, atol=1e-12, rtol=0
        )

    def test_requires_unit_bandwidth_input(self):
        M = random_endmembers(10, 2, seed=1)
        K2 = gram_matrix(M, 2.0)
        with pytest.raises(InputError):
            gram_power(K2, 0.5)


class TestCoherence:
    def test_orthonormal_case_is_zero(self):
        K = GramMatrix(np.eye(4), 1.0)
        assert coherence(K) == 0.0

    def test_single_pair(self):
        K = GramMatrix(np.array([[1.0, 0.3], [0.3, 1.0]]), 1.0)
        assert coherence(K) == 0.3

    def test_matches_pair_scan_oracle(self):
        M = random_endmembers(8, 3, seed=3)
        K = gram_matrix(M, 0.2)
        expected = max(
            abs(K.values[i, j]) for i in range(8) for j in range(i + 1, 8)
        )
        assert coherence(K) == expected

    def test_restricted_to_indices(self):
        M = random_endmembers(10, 3, seed=9)
        K = gram_matrix(M, 0.3)
        idx = [1, 4, 7]
        expected = max(
            abs(K.values[i, j]) for i in idx for j in idx if i < j
        )
        assert coherence(K, idx) == expected

    def test_degenerate_sets_are_zero(self):
        K = gram_matrix(random_endmembers(5, 2, seed=0), 1.0)
        assert coherence(K, []) == 0.0
        assert coherence(K, [2]) == 0.0

    def test_monotone_under_inclusion(self):
        rng = np.random.default_rng(11)
        K = gram_matrix(rng.random((12, 3)), 0.5)
        for _ in range(50):
            size_t = int(rng.integers(2, 13))
            T = rng.choice(12, size=size_t, replace=False)
            size_s = int(rng.integers(1, size_t + 1))
            S = rng.choice(T, size=size_s, replace=False)
            assert coherence(K, S) <= coherence(K, T)

    def test_out_of_range_indices(self):
        K = gram_matrix(random_endmembers(5, 2, seed=0), 1.0)
        with pytest.raises(InputError):
            coherence(K, [0, 9])
