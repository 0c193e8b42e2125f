"""Input validation helpers.

Every public entry point funnels its array/scalar arguments through these
checks so error messages stay uniform and numeric code can assume clean
float64 inputs.
"""
from __future__ import annotations

import numbers

import numpy as np

from .exceptions import InputError, ParameterError


def check_endmembers(M, name="endmembers", min_bands=2):
    """Validate an endmember matrix: 2-D, bands as rows, all finite.

    Returns the array as float64 with shape (L, R), R >= 1. Full matrices
    need L >= 2; band-restricted sub-matrices may pass ``min_bands=1``.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise InputError(f"{name} must be a 2-D array, got ndim={M.ndim}")
    L, R = M.shape
    if L < min_bands:
        raise InputError(f"{name} needs at least {min_bands} bands (rows), got {L}")
    if R < 1:
        raise InputError(f"{name} needs at least 1 column, got {R}")
    if not np.all(np.isfinite(M)):
        raise InputError(f"{name} contains non-finite entries")
    return M


def check_pixels(X, n_bands=None, name="pixels"):
    """Validate a pixel matrix (n_pixels, n_bands) of finite reflectances."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[np.newaxis, :]
    if X.ndim != 2:
        raise InputError(f"{name} must be 1-D or 2-D, got ndim={X.ndim}")
    if not np.all(np.isfinite(X)):
        raise InputError(f"{name} contains non-finite entries")
    if n_bands is not None and X.shape[1] != n_bands:
        raise InputError(
            f"{name} has {X.shape[1]} bands, expected {n_bands}"
        )
    return X


def check_vector(x, name="x"):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InputError(f"{name} must be 1-D, got ndim={x.ndim}")
    if not np.all(np.isfinite(x)):
        raise InputError(f"{name} contains non-finite entries")
    return x


def check_sigma2(sigma2, name="sigma2"):
    if not isinstance(sigma2, numbers.Real) or not np.isfinite(sigma2):
        raise ParameterError(f"{name} must be a finite real number")
    sigma2 = float(sigma2)
    if sigma2 <= 0.0:
        raise ParameterError(f"{name} must be positive, got {sigma2}")
    return sigma2


def check_positive_int(value, minimum, name):
    if not isinstance(value, numbers.Integral):
        raise ParameterError(f"{name} must be an integer")
    value = int(value)
    if value < minimum:
        raise ParameterError(f"{name} must be >= {minimum}, got {value}")
    return value


def check_band_indices(indices, n_bands, name="indices"):
    """Validate a band index set: distinct ints inside [0, n_bands)."""
    idx = np.asarray(indices, dtype=int)
    if idx.ndim != 1:
        raise InputError(f"{name} must be 1-D")
    if idx.size == 0:
        raise InputError(f"{name} must not be empty")
    if np.any(idx < 0) or np.any(idx >= n_bands):
        raise InputError(f"{name} out of range for {n_bands} bands")
    if np.unique(idx).size != idx.size:
        raise InputError(f"{name} contains duplicate entries")
    return np.sort(idx)


def as_rng(seed):
    """Accept an int seed, a Generator, or None; return a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def as_seed_sequence(seed):
    """Accept an int seed, a SeedSequence, or None; return a SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)
