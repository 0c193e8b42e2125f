"""Gaussian kernel evaluation and Gram matrices over band-row vectors.

The unmixing model treats each spectral band as a point in R^R (the row of
the endmember matrix at that band). Band similarity is measured with a
Gaussian kernel; the resulting L x L Gram matrix drives both the coherence
criterion and the kernel regressions.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .exceptions import InputError
from .validation import check_endmembers, check_sigma2, check_vector


@dataclass(frozen=True)
class GramMatrix:
    """Symmetric unit-diagonal kernel matrix over band rows.

    ``values[i, j] = exp(-||m_i - m_j||^2 / (2 * sigma2))`` for band rows
    m_i, m_j. Entries are mirrored exactly (computed once per pair), the
    diagonal is exactly 1, and every entry lies in [0, 1]. Mathematically
    all entries are strictly positive; exact zeros can only appear through
    float underflow at very small bandwidths.
    """

    values: np.ndarray
    sigma2: float

    def __post_init__(self):
        K = np.asarray(self.values, dtype=float)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise InputError("Gram matrix must be square")
        if K.shape[0] < 1:
            raise InputError("Gram matrix must be non-empty")
        if not np.array_equal(K, K.T):
            raise InputError("Gram matrix must be exactly symmetric")
        if not np.all(np.diag(K) == 1.0):
            raise InputError("Gram matrix must have a unit diagonal")
        if np.any(K < 0.0) or np.any(K > 1.0):
            raise InputError("Gram entries must lie in [0, 1]")
        object.__setattr__(self, "values", K)
        object.__setattr__(self, "sigma2", float(self.sigma2))

    @property
    def n_bands(self) -> int:
        return self.values.shape[0]


def gram_values(K) -> np.ndarray:
    """Return the raw matrix behind a GramMatrix or array-like."""
    if isinstance(K, GramMatrix):
        return K.values
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise InputError("expected a square kernel matrix")
    return K


def gaussian_kernel(x, y, sigma2) -> float:
    """Gaussian kernel exp(-||x - y||^2 / (2 * sigma2)).

    Equals 1 exactly iff ``x == y``.
    """
    sigma2 = check_sigma2(sigma2)
    x = check_vector(x, "x")
    y = check_vector(y, "y")
    if x.shape != y.shape:
        raise InputError(f"x and y must have the same length, got {x.size} and {y.size}")
    d2 = float(np.dot(x - y, x - y))
    return float(np.exp(-d2 / (2.0 * sigma2)))


def gram_matrix(M, sigma2) -> GramMatrix:
    """Gaussian Gram matrix over the rows of an endmember matrix.

    Parameters
    ----------
    M : array_like, shape (L, R)
        Endmember matrix; row ``i`` is the signature vector of band ``i``.
    sigma2 : float
        Kernel bandwidth (squared).

    Returns
    -------
    GramMatrix
        L x L matrix with entries ``exp(-||m_i - m_j||^2 / (2 sigma2))``.
    """
    sigma2 = check_sigma2(sigma2)
    M = check_endmembers(M, "M")
    # pdist evaluates each pair once; squareform mirrors, so symmetry is
    # exact and the diagonal is exp(0) == 1.
    d2 = squareform(pdist(M, metric="sqeuclidean"))
    return GramMatrix(np.exp(-d2 / (2.0 * sigma2)), sigma2)


def gram_power(K1: GramMatrix, sigma2) -> GramMatrix:
    """Rescale a unit-bandwidth Gram matrix to bandwidth ``sigma2``.

    Elementwise power: ``K1 ** (1 / sigma2)``. Identical to rebuilding the
    Gram matrix at ``sigma2`` because
    ``exp(-d/2) ** (1/s) == exp(-d / (2s))``.
    """
    sigma2 = check_sigma2(sigma2)
    if not isinstance(K1, GramMatrix):
        raise InputError("K1 must be a GramMatrix")
    if K1.sigma2 != 1.0:
        raise InputError(f"K1 must be built with bandwidth 1, got {K1.sigma2}")
    return GramMatrix(np.power(K1.values, 1.0 / sigma2), sigma2)


def coherence(K, indices=None) -> float:
    """Largest absolute off-diagonal Gram entry within an index set.

    ``indices`` restricts the matrix to a band subset; omitted means the
    full matrix. Sets with fewer than two members have coherence 0 by
    convention (the max over an empty pair set).
    """
    V = gram_values(K)
    n = V.shape[0]
    if indices is not None:
        idx = np.asarray(sorted(set(int(i) for i in indices)), dtype=int)
        if idx.size and (idx[0] < 0 or idx[-1] >= n):
            raise InputError(f"indices out of range for {n} bands")
        if idx.size < 2:
            return 0.0
        V = V[np.ix_(idx, idx)]
        n = idx.size
    if n < 2:
        return 0.0
    off = np.abs(V[~np.eye(n, dtype=bool)])
    return float(off.max())
