import numpy as np
import pytest

from bandclique import (
    InputError,
    ParameterError,
    add_noise,
    gbm,
    lmm,
    pnmm,
    random_endmembers,
    sample_simplex,
    synth_scene,
)


class TestSampleSimplex:
    def test_degenerate_one_component(self):
        rng = np.random.default_rng(0)
        np.testing.assert_array_equal(sample_simplex(1, rng), [1.0])

    def test_simplex_constraints_exact(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            a = sample_simplex(5, rng)
            assert np.all(a >= 0.0)
            assert abs(a.sum() - 1.0) <= 1e-12

    def test_componentwise_mean(self):
        # symmetry forces mean 1/R; flat-Dirichlet variance gives the SE
        rng = np.random.default_rng(2)
        R, n = 8, 100_000
        draws = np.array([sample_simplex(R, rng) for _ in range(n)])
        var = (1.0 / R) * (1.0 - 1.0 / R) / (R + 1)
        se = np.sqrt(var / n)
        assert np.all(np.abs(draws.mean(axis=0) - 1.0 / R) <= 3 * se)

    def test_corner_region_probability(self):
        # P(a_1 > t) on the 2-simplex equals (1 - t)^2; t = 0.5 -> 1/4
        rng = np.random.default_rng(3)
        n = 100_000
        draws = np.array([sample_simplex(3, rng)[0] for _ in range(n)])
        p_hat = float((draws > 0.5).mean())
        se = np.sqrt(0.25 * 0.75 / n)
        assert abs(p_hat - 0.25) <= 3 * se


class TestLinearMix:
    def test_vertex_hits_endmember(self):
        M = random_endmembers(12, 4, seed=0)
        alpha = np.zeros(4)
        alpha[2] = 1.0
        np.testing.assert_array_equal(lmm(M, alpha), M[:, 2])

    def test_even_blend_is_column_average(self):
        M = random_endmembers(9, 2, seed=1)
        np.testing.assert_allclose(
            lmm(M, [0.5, 0.5]), M.mean(axis=1), atol=1e-15
        )

    def test_matches_rowwise_oracle(self):
        rng = np.random.default_rng(4)
        M = rng.random((15, 5))
        alpha = sample_simplex(5, rng)
        expected = np.array([float(np.dot(M[i], alpha)) for i in range(15)])
        np.testing.assert_allclose(lmm(M, alpha), expected, atol=1e-14)

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            lmm(np.ones((4, 3)), [0.5, 0.5])


class TestBilinearMix:
    def test_zero_delta_reduces_to_linear(self):
        rng = np.random.default_rng(5)
        M = rng.random((10, 4))
        alpha = sample_simplex(4, rng)
        np.testing.assert_allclose(gbm(M, alpha, 0.0), lmm(M, alpha), atol=1e-14)

    def test_pure_pixel_has_no_cross_term(self):
        M = random_endmembers(8, 2, seed=2)
        np.testing.assert_allclose(gbm(M, [1.0, 0.0], 1.0), M[:, 0], atol=1e-15)

    def test_matches_pairwise_loop_oracle(self):
        rng = np.random.default_rng(6)
        M = rng.random((11, 3))
        alpha = sample_simplex(3, rng)
        delta = 0.8
        expected = M @ alpha
        for i in range(3):
            for j in range(i + 1, 3):
                expected = expected + delta * alpha[i] * alpha[j] * M[:, i] * M[:, j]
        np.testing.assert_allclose(gbm(M, alpha, delta), expected, atol=1e-14)

    def test_delta_domain(self):
        M = random_endmembers(5, 2, seed=3)
        with pytest.raises(ParameterError):
            gbm(M, [0.5, 0.5], 1.5)
        with pytest.raises(ParameterError):
            gbm(M, [0.5, 0.5], -0.1)


class TestPostNonlinearMix:
    def test_unit_exponent_reduces_to_linear(self):
        rng = np.random.default_rng(7)
        M = rng.random((10, 4))
        alpha = sample_simplex(4, rng)
        np.testing.assert_allclose(pnmm(M, alpha, 1.0), lmm(M, alpha), atol=1e-14)

    def test_square_exponent(self):
        rng = np.random.default_rng(8)
        M = rng.random((10, 3))
        alpha = sample_simplex(3, rng)
        np.testing.assert_allclose(
            pnmm(M, alpha, 2.0), lmm(M, alpha) ** 2, atol=1e-14
        )

    def test_fractional_exponent_matches_scalar_oracle(self):
        rng = np.random.default_rng(9)
        M = rng.random((12, 4))
        alpha = sample_simplex(4, rng)
        linear = M @ alpha
        expected = np.array([float(v) ** 0.7 for v in linear])
        np.testing.assert_allclose(pnmm(M, alpha, 0.7), expected, atol=1e-14)

    def test_negative_base_with_fractional_exponent(self):
        M = np.array([[-1.0, -1.0], [1.0, 1.0]])
        with pytest.raises(InputError):
            pnmm(M, [0.5, 0.5], 0.7)


class TestAddNoise:
    def test_vanishing_noise_at_huge_snr(self):
        rng = np.random.default_rng(10)
        clean = random_endmembers(50, 3, seed=4)[:, 0]
        noisy = add_noise(clean, 300.0, rng)
        assert np.max(np.abs(noisy - clean)) <= 1e-10 * np.max(np.abs(clean))

    def test_monte_carlo_snr(self):
        rng = np.random.default_rng(11)
        clean = random_endmembers(100, 3, seed=5)[:, 1]
        signal_power = float(clean @ clean)
        noise_power = 0.0
        n = 10_000
        for _ in range(n):
            noise = add_noise(clean, 21.0, rng) - clean
            noise_power += float(noise @ noise)
        snr_hat = 10.0 * np.log10(signal_power / (noise_power / n))
        assert abs(snr_hat - 21.0) <= 0.1

    def test_reproducible_given_seed(self):
        clean = np.array([0.4, 0.6, 0.8])
        a = add_noise(clean, 21.0, np.random.default_rng(42))
        b = add_noise(clean, 21.0, np.random.default_rng(42))
        np.testing.assert_array_equal(a, b)

    def test_all_zero_signal_rejected(self):
        with pytest.raises(ParameterError):
            add_noise(np.zeros(5), 21.0, np.random.default_rng(0))


class TestSynthScene:
    def test_noiseless_pixels_match_model(self):
        M = random_endmembers(20, 3, seed=6)
        scene = synth_scene(M, 5, "lmm", seed=7)
        for i in range(5):
            np.testing.assert_allclose(
                scene.pixels[i], lmm(M, scene.abundances[i]), atol=1e-14
            )

    def test_bilinear_difference_is_pure_cross_term(self):
        M = random_endmembers(20, 4, seed=8)
        linear = synth_scene(M, 6, "lmm", seed=9)
        bilinear = synth_scene(M, 6, "gbm", delta=1.0, seed=9)
        np.testing.assert_array_equal(linear.abundances, bilinear.abundances)
        for i in range(6):
            a = linear.abundances[i]
            np.testing.assert_allclose(
                bilinear.pixels[i] - linear.pixels[i],
                gbm(M, a, 1.0) - lmm(M, a),
                atol=1e-12,
            )

    def test_protocol_shape(self):
        M = random_endmembers(30, 8, seed=10)
        scene = synth_scene(M, 40, "pnmm", xi=0.7, snr_db=21.0, seed=11)
        assert scene.pixels.shape == (40, 30)
        assert scene.abundances.shape == (40, 8)
        assert scene.snr_db == 21.0
        sums = scene.abundances.sum(axis=1)
        assert np.all(np.abs(sums - 1.0) <= 1e-12)
        assert np.all(scene.abundances >= 0.0)

    def test_deterministic_given_seed(self):
        M = random_endmembers(15, 3, seed=12)
        a = synth_scene(M, 8, "gbm", delta=0.5, snr_db=21.0, seed=13)
        b = synth_scene(M, 8, "gbm", delta=0.5, snr_db=21.0, seed=13)
        np.testing.assert_array_equal(a.pixels, b.pixels)
        np.testing.assert_array_equal(a.abundances, b.abundances)

    def test_model_parameter_required(self):
        M = random_endmembers(10, 2, seed=14)
        with pytest.raises(ParameterError):
            synth_scene(M, 2, "gbm", seed=0)  # delta missing
        with pytest.raises(ParameterError):
            synth_scene(M, 2, "pnmm", seed=0)  # xi missing
        with pytest.raises(ParameterError):
            synth_scene(M, 2, "nope", seed=0)
