"""Automatic selection of the coherence threshold and kernel bandwidth.

Given a target dictionary size M, the threshold is set to mu0 = 1/(M-1)
(the linear-independence bound for an M-element dictionary), and the
bandwidth sigma2 is solved so that the mean off-diagonal Gram entry equals
mu0. The mean of the powered Gram matrix is strictly decreasing in
1/sigma2 whenever some entry lies strictly inside (0, 1), so the root is
unique and bisection is globally convergent.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConvergenceError, InputError, ParameterError
from .kernels import GramMatrix
from .validation import check_positive_int

#: Residual tolerance on |mean off-diagonal - mu0| for the bandwidth solve.
BANDWIDTH_TOL = 1e-10
#: Bisection iteration cap.
BANDWIDTH_MAX_ITER = 200
#: Initial bracket for t = 1/sigma2.
_BRACKET = (1e-6, 1e6)
_BRACKET_GROWTH = 10.0
_BRACKET_EXPANSIONS = 20


@dataclass(frozen=True)
class ParamSetting:
    """Resolved (mu0, sigma2) pair for a target dictionary size."""

    target_size: int
    mu0: float
    sigma2: float
    residual: float


def coherence_threshold(M) -> float:
    """Coherence threshold 1/(M-1) for a target dictionary size M >= 2.

    Any dictionary whose coherence stays strictly below this value has M
    linearly independent elements.
    """
    M = check_positive_int(M, 2, "M")
    return 1.0 / (M - 1)


def _offdiagonal_sorted(K) -> np.ndarray:
    """Strict upper-triangle entries, sorted ascending.

    Sorting fixes the summation order, which makes every statistic built
    on top of it invariant under band permutations (the multiset of
    off-diagonal entries does not change when bands are relabeled).
    """
    if isinstance(K, GramMatrix):
        K = K.values
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    if n < 2:
        raise InputError("need at least 2 bands for off-diagonal statistics")
    vals = K[np.triu_indices(n, k=1)]
    return np.sort(vals)


def mean_offdiagonal(K) -> float:
    """Arithmetic mean of the strict upper triangle of a Gram matrix."""
    vals = _offdiagonal_sorted(K)
    return float(vals.sum() / vals.size)


def solve_bandwidth(K1: GramMatrix, mu0, return_setting=False):
    """Solve for sigma2 so the mean off-diagonal Gram entry equals mu0.

    Parameters
    ----------
    K1 : GramMatrix
        Gram matrix computed at unit bandwidth.
    mu0 : float
        Target mean, strictly inside (0, 1).
    return_setting : bool
        When true, also return the achieved residual.

    Returns
    -------
    float, or (float, float)
        The bandwidth sigma2 (and the residual when requested).

    Raises
    ------
    ConvergenceError
        If no bandwidth reaches the target within the bracket-expansion
        and iteration limits; carries the best bracket found.

    Notes
    -----
    Works on t = 1/sigma2. The objective mean(K1 ** t) is strictly
    decreasing in t (entries lie in (0, 1]; constant entries equal to 1
    are included in the mean but do not affect monotonicity), so plain
    bisection finds the unique root. Deterministic: identical inputs give
    bitwise-identical output.
    """
    if not isinstance(K1, GramMatrix):
        raise InputError("K1 must be a GramMatrix")
    if K1.sigma2 != 1.0:
        raise InputError(f"K1 must be built with bandwidth 1, got {K1.sigma2}")
    mu0 = float(mu0)
    if not 0.0 < mu0 < 1.0:
        raise ParameterError(f"mu0 must lie strictly inside (0, 1), got {mu0}")

    vals = _offdiagonal_sorted(K1)
    interior = (vals > 0.0) & (vals < 1.0)
    if not np.any(interior):
        raise ParameterError(
            "bandwidth target unreachable: no off-diagonal Gram entry lies "
            "strictly inside (0, 1), so the mean does not depend on sigma2"
        )

    def objective(t):
        return float(np.power(vals, t).sum() / vals.size) - mu0

    t_lo, t_hi = _BRACKET
    g_lo, g_hi = objective(t_lo), objective(t_hi)
    # Expand geometrically until the root is bracketed (g decreasing in t,
    # so we need g_lo >= 0 >= g_hi).
    expansions = 0
    while g_lo < 0.0 and expansions < _BRACKET_EXPANSIONS:
        t_lo /= _BRACKET_GROWTH
        g_lo = objective(t_lo)
        expansions += 1
    expansions = 0
    while g_hi > 0.0 and expansions < _BRACKET_EXPANSIONS:
        t_hi *= _BRACKET_GROWTH
        g_hi = objective(t_hi)
        expansions += 1
    if g_lo < 0.0 or g_hi > 0.0:
        raise ConvergenceError(
            f"could not bracket the bandwidth root for mu0={mu0}",
            bracket=(t_lo, t_hi),
            residual=min(abs(g_lo), abs(g_hi)),
        )

    t_best, g_best = (t_lo, g_lo) if abs(g_lo) < abs(g_hi) else (t_hi, g_hi)
    for _ in range(BANDWIDTH_MAX_ITER):
        if abs(g_best) <= BANDWIDTH_TOL:
            break
        t_mid = 0.5 * (t_lo + t_hi)
        g_mid = objective(t_mid)
        if abs(g_mid) < abs(g_best):
            t_best, g_best = t_mid, g_mid
        if g_mid >= 0.0:
            t_lo = t_mid
        else:
            t_hi = t_mid
    if abs(g_best) > BANDWIDTH_TOL:
        raise ConvergenceError(
            f"bandwidth bisection stalled at residual {abs(g_best):.3e} "
            f"(tolerance {BANDWIDTH_TOL:.0e})",
            bracket=(t_lo, t_hi),
            residual=abs(g_best),
        )
    sigma2 = 1.0 / t_best
    if return_setting:
        return sigma2, abs(g_best)
    return sigma2


def auto_params(K1: GramMatrix, M) -> ParamSetting:
    """Resolve (mu0, sigma2) for a target dictionary size on one matrix."""
    mu0 = coherence_threshold(M)
    if mu0 >= 1.0:
        raise ParameterError(
            "target size M=2 gives threshold 1.0, for which no finite "
            "bandwidth exists; use M >= 3 or set sigma2 explicitly"
        )
    sigma2, residual = solve_bandwidth(K1, mu0, return_setting=True)
    return ParamSetting(target_size=int(M), mu0=mu0, sigma2=sigma2, residual=residual)
