"""Synthetic scene generation: simplex abundances, mixing models, noise.

Pixels are synthesized from an endmember matrix with one of three mixing
mechanisms and white Gaussian noise calibrated to a target SNR:

* linear: a convex combination of the endmember columns,
* bilinear: the linear mix plus pairwise endmember interaction terms
  weighted by a single scalar,
* post-nonlinear: an elementwise power applied to the linear mix.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InputError, ParameterError
from .validation import (
    as_rng,
    as_seed_sequence,
    check_endmembers,
    check_positive_int,
    check_vector,
)

MODELS = ("lmm", "gbm", "pnmm")

_SIMPLEX_TOL = 1e-12


def sample_simplex(R, rng) -> np.ndarray:
    """Draw one point uniformly from the (R-1)-simplex.

    Uses R unit-exponential draws normalized by their sum (a flat
    Dirichlet), which is exactly uniform.
    """
    R = check_positive_int(R, 1, "R")
    rng = as_rng(rng)
    if R == 1:
        return np.ones(1)
    draws = rng.exponential(size=R)
    alpha = draws / draws.sum()
    if abs(alpha.sum() - 1.0) > _SIMPLEX_TOL:
        alpha = alpha / alpha.sum()
    return alpha


def _check_abundance(alpha, R) -> np.ndarray:
    alpha = check_vector(alpha, "alpha")
    if alpha.size != R:
        raise InputError(f"alpha has length {alpha.size}, expected {R}")
    if np.any(alpha < 0.0) or abs(alpha.sum() - 1.0) > 1e-9:
        raise InputError("alpha must be nonnegative and sum to one")
    return alpha


def lmm(M, alpha) -> np.ndarray:
    """Linear mix: M @ alpha (noiseless)."""
    M = check_endmembers(M, "M")
    alpha = _check_abundance(alpha, M.shape[1])
    return M @ alpha


def gbm(M, alpha, delta) -> np.ndarray:
    """Bilinear mix with a single interaction weight.

    Adds ``delta * sum_{i<j} alpha_i alpha_j (m_i * m_j)`` (elementwise
    products of endmember columns) to the linear mix. ``delta`` must lie
    in [0, 1]; ``delta == 0`` reduces to :func:`lmm`.
    """
    M = check_endmembers(M, "M")
    alpha = _check_abundance(alpha, M.shape[1])
    delta = float(delta)
    if not 0.0 <= delta <= 1.0:
        raise ParameterError(f"delta must lie in [0, 1], got {delta}")
    linear = M @ alpha
    # sum_{i<j} a_i a_j m_i*m_j == ((M a)^2 - (M^2)(a^2)) / 2, elementwise
    bilinear = 0.5 * (linear * linear - (M * M) @ (alpha * alpha))
    return linear + delta * bilinear


def pnmm(M, alpha, xi) -> np.ndarray:
    """Post-nonlinear mix: elementwise power of the linear mix.

    Fractional exponents require a nonnegative linear mix.
    """
    M = check_endmembers(M, "M")
    alpha = _check_abundance(alpha, M.shape[1])
    xi = float(xi)
    if xi <= 0.0:
        raise ParameterError(f"xi must be positive, got {xi}")
    linear = M @ alpha
    if xi != round(xi) and np.any(linear < 0.0):
        raise InputError(
            "post-nonlinear model with fractional exponent requires a "
            "nonnegative linear mix"
        )
    return np.power(linear, xi)


def add_noise(clean, snr_db, rng) -> np.ndarray:
    """Add white Gaussian noise at a per-pixel SNR (dB).

    The noise variance is ``||clean||^2 / (L * 10^(snr_db/10))`` so that
    the expected noise power matches the signal power divided by the
    target ratio.
    """
    clean = check_vector(clean, "clean")
    signal_power = float(np.dot(clean, clean))
    if signal_power == 0.0:
        raise ParameterError("cannot calibrate noise against an all-zero signal")
    snr_db = float(snr_db)
    rng = as_rng(rng)
    var = signal_power / (clean.size * 10.0 ** (snr_db / 10.0))
    return clean + rng.normal(0.0, np.sqrt(var), size=clean.size)


@dataclass(frozen=True)
class SyntheticScene:
    """A synthesized image plus its ground truth."""

    pixels: np.ndarray        # (N, L)
    abundances: np.ndarray    # (N, R)
    endmembers: np.ndarray    # (L, R)
    model: str
    delta: float | None
    xi: float | None
    snr_db: float | None
    seed: int | None
    extras: dict = field(default_factory=dict, compare=False)

    @property
    def n_pixels(self) -> int:
        return self.pixels.shape[0]

    @property
    def n_bands(self) -> int:
        return self.pixels.shape[1]

    @property
    def n_endmembers(self) -> int:
        return self.abundances.shape[1]


def evaluate_model(M, alpha, model, delta=None, xi=None) -> np.ndarray:
    """Noiseless model output for one abundance vector."""
    if model == "lmm":
        return lmm(M, alpha)
    if model == "gbm":
        if delta is None:
            raise ParameterError("gbm requires delta")
        return gbm(M, alpha, delta)
    if model == "pnmm":
        if xi is None:
            raise ParameterError("pnmm requires xi")
        return pnmm(M, alpha, xi)
    raise ParameterError(f"unknown mixing model {model!r}; choose from {MODELS}")


def synth_scene(M, n_pixels, model="lmm", *, delta=None, xi=None,
                snr_db=None, seed=0) -> SyntheticScene:
    """Synthesize a scene of independent pixels.

    Each pixel draws its abundance and its noise from an independent
    substream spawned from ``seed``, so the result does not depend on
    evaluation order or thread count. ``snr_db=None`` means noiseless.
    """
    M = check_endmembers(M, "M")
    n_pixels = check_positive_int(n_pixels, 1, "n_pixels")
    if model not in MODELS:
        raise ParameterError(f"unknown mixing model {model!r}; choose from {MODELS}")
    L, R = M.shape
    pixels = np.empty((n_pixels, L))
    abundances = np.empty((n_pixels, R))
    streams = as_seed_sequence(seed).spawn(n_pixels)
    for i, stream in enumerate(streams):
        rng = np.random.default_rng(stream)
        alpha = sample_simplex(R, rng)
        clean = evaluate_model(M, alpha, model, delta=delta, xi=xi)
        abundances[i] = alpha
        pixels[i] = clean if snr_db is None else add_noise(clean, snr_db, rng)
    return SyntheticScene(
        pixels=pixels,
        abundances=abundances,
        endmembers=M,
        model=model,
        delta=None if delta is None else float(delta),
        xi=None if xi is None else float(xi),
        snr_db=None if snr_db is None else float(snr_db),
        seed=int(seed) if isinstance(seed, (int, np.integer)) else None,
    )


def random_endmembers(n_bands, n_endmembers, seed=0) -> np.ndarray:
    """Smooth synthetic reflectance spectra for tests and benchmarks.

    Each endmember is a random mixture of Gaussian bumps over the band
    axis, rescaled into [0.05, 0.95]; smooth enough that neighboring band
    rows are strongly coherent, like real spectra.
    """
    n_bands = check_positive_int(n_bands, 2, "n_bands")
    n_endmembers = check_positive_int(n_endmembers, 1, "n_endmembers")
    rng = as_rng(seed)
    x = np.linspace(0.0, 1.0, n_bands)
    M = np.empty((n_bands, n_endmembers))
    for j in range(n_endmembers):
        n_bumps = int(rng.integers(3, 7))
        spectrum = np.zeros(n_bands)
        for _ in range(n_bumps):
            amp = rng.uniform(0.2, 1.0)
            center = rng.uniform(0.0, 1.0)
            width = rng.uniform(0.03, 0.2)
            spectrum += amp * np.exp(-((x - center) ** 2) / (2.0 * width**2))
        spectrum -= spectrum.min()
        peak = spectrum.max()
        if peak > 0.0:
            spectrum /= peak
        M[:, j] = 0.05 + 0.9 * spectrum
    return M
