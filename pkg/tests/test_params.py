import math

import numpy as np
import pytest

from bandclique import (
    ConvergenceError,
    GramMatrix,
    ParameterError,
    coherence_threshold,
    gram_matrix,
    gram_power,
    mean_offdiagonal,
    random_endmembers,
    solve_bandwidth,
)


def constant_gram(n, c):
    V = np.full((n, n), c)
    np.fill_diagonal(V, 1.0)
    return GramMatrix(V, 1.0)


class TestCoherenceThreshold:
    @pytest.mark.parametrize(
        "m,expected", [(5, 0.25), (10, 0.1111), (20, 0.0526), (30, 0.0345)]
    )
    def test_published_pairs_at_4dp(self, m, expected):
        assert round(coherence_threshold(m), 4) == expected

    def test_degenerate_size_two(self):
        assert coherence_threshold(2) == 1.0

    def test_rejects_small_m(self):
        with pytest.raises(ParameterError):
            coherence_threshold(1)
        with pytest.raises(ParameterError):
            coherence_threshold(0)

    def test_strictly_decreasing_in_m(self):
        values = [coherence_threshold(m) for m in range(2, 60)]
        assert all(a > b for a, b in zip(values, values[1:]))


class TestMeanOffdiagonal:
    def test_constant_entries(self):
        assert mean_offdiagonal(constant_gram(6, 0.4)) == pytest.approx(0.4, abs=1e-15)

    def test_hand_mean(self):
        V = np.eye(3)
        V[0, 1] = V[1, 0] = 0.1
        V[0, 2] = V[2, 0] = 0.2
        V[1, 2] = V[2, 1] = 0.3
        assert mean_offdiagonal(GramMatrix(V, 1.0)) == pytest.approx(0.2, abs=1e-15)

    def test_matches_double_loop_oracle(self):
        K = gram_matrix(random_endmembers(20, 4, seed=2), 1.0)
        total, count = 0.0, 0
        for i in range(20):
            for j in range(i + 1, 20):
                total += K.values[i, j]
                count += 1
        assert mean_offdiagonal(K) == pytest.approx(total / count, abs=1e-14)

    def test_permutation_invariant(self):
        K = gram_matrix(random_endmembers(30, 4, seed=8), 1.0)
        perm = np.random.default_rng(0).permutation(30)
        Kp = GramMatrix(K.values[np.ix_(perm, perm)], 1.0)
        assert mean_offdiagonal(Kp) == mean_offdiagonal(K)


class TestSolveBandwidth:
    def test_closed_form_exp_minus_one(self):
        # all off-diagonal entries c = e^-1, target 0.25:
        # c ** (1/s) == 0.25  ->  s = ln c / ln 0.25 = 1 / ln 4
        K = constant_gram(8, math.exp(-1.0))
        assert solve_bandwidth(K, 0.25) == pytest.approx(1.0 / math.log(4.0), abs=1e-8)

    def test_fixed_point_when_target_equals_entries(self):
        K = constant_gram(8, 0.25)
        assert solve_bandwidth(K, 0.25) == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("c", [0.05, 0.15, 0.3, 0.5, 0.7])
    @pytest.mark.parametrize("mu0", [0.0345, 0.1111, 0.25, 0.5])
    def test_closed_form_grid(self, c, mu0):
        K = constant_gram(10, c)
        expected = math.log(c) / math.log(mu0)
        assert solve_bandwidth(K, mu0) == pytest.approx(expected, abs=1e-8)

    def test_residual_on_random_matrix(self):
        K1 = gram_matrix(random_endmembers(50, 5, seed=3), 1.0)
        for mu0 in (0.25, 0.1111):
            s2 = solve_bandwidth(K1, mu0)
            assert abs(mean_offdiagonal(gram_power(K1, s2)) - mu0) <= 1e-10

    def test_bandwidth_grows_with_target(self):
        # a larger target mean needs a milder decay, hence larger sigma2
        # (grid-scan oracle: mean(K1 ** (1/s)) increases with s)
        K1 = gram_matrix(random_endmembers(50, 5, seed=3), 1.0)
        s_small = solve_bandwidth(K1, 0.1111)
        s_large = solve_bandwidth(K1, 0.25)
        assert s_large > s_small
        grid = np.linspace(s_small, s_large, 10)
        means = [mean_offdiagonal(gram_power(K1, s)) for s in grid]
        assert all(a < b for a, b in zip(means, means[1:]))

    def test_mean_strictly_decreasing_in_inverse_bandwidth(self):
        K1 = gram_matrix(random_endmembers(30, 4, seed=6), 1.0)
        inv = np.logspace(-2, 2, 20)
        means = [mean_offdiagonal(gram_power(K1, 1.0 / t)) for t in inv]
        assert all(a > b for a, b in zip(means, means[1:]))

    def test_deterministic_bitwise(self):
        K1 = gram_matrix(random_endmembers(40, 4, seed=5), 1.0)
        a = solve_bandwidth(K1, 0.0345)
        b = solve_bandwidth(K1, 0.0345)
        assert a == b

    def test_rejects_target_outside_open_interval(self):
        K = constant_gram(5, 0.4)
        with pytest.raises(ParameterError):
            solve_bandwidth(K, 1.0)
        with pytest.raises(ParameterError):
            solve_bandwidth(K, 0.0)

    def test_rejects_constant_objective(self):
        V = np.ones((4, 4))
        K = GramMatrix(V, 1.0)  # duplicates only: every entry 1
        with pytest.raises(ParameterError):
            solve_bandwidth(K, 0.5)

    def test_unreachable_target_reports_bracket(self):
        # one third of the pairs are exact duplicates (entry 1), so the
        # mean cannot drop below 1/3; a target of 0.25 is unreachable.
        M = np.vstack([np.tile([0.5, 0.5], (6, 1)),
                       random_endmembers(4, 2, seed=1) + 5.0])
        K1 = gram_matrix(M, 1.0)
        ones = np.isclose(K1.values[np.triu_indices(10, 1)], 1.0).mean()
        assert ones >= 1.0 / 3.0
        with pytest.raises(ConvergenceError) as excinfo:
            solve_bandwidth(K1, 0.25)
        assert excinfo.value.bracket is not None
