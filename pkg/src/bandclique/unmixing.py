"""Kernel regression and abundance estimation.

Two per-pixel regressors over band-row vectors:

* a least-squares kernel regressor (ridge regression in feature space),
  solving ``(K + mu I) beta = r``;
* a semi-parametric unmixer ("SK-Hype") combining a linear trend in the
  endmembers, weighted u, with a kernel residual weighted (1 - u). For
  fixed u the dual is a strictly convex QP with nonnegativity constraints
  on the endmember multipliers, solved by an active-set method; u itself
  is found by golden-section search on the optimal dual value J(u).

Both accept an optional band dictionary restricting the model to a band
subset.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .exceptions import (
    ConvergenceError,
    DegenerateSolutionError,
    InputError,
    ParameterError,
    SolverError,
)
from .kernels import gram_matrix
from .params import auto_params
from .selection import BandDictionary
from .validation import (
    check_band_indices,
    check_endmembers,
    check_pixels,
    check_sigma2,
    check_vector,
)

#: Default ridge regularization (the linear systems see K + mu I).
DEFAULT_MU_REG = 1e-2
#: Reference dictionary size used to auto-solve a bandwidth when no
#: dictionary supplies one.
DEFAULT_BANDWIDTH_TARGET = 30
#: Search interval and tolerance for the linear/nonlinear balance u.
U_BOUNDS = (1e-3, 1.0 - 1e-3)
U_TOL = 1e-6

_JITTER0 = 1e-10
_JITTER_GROWTH = 10.0
_JITTER_TRIES = 3
_ACTIVE_SET_MAX_ITER = 100
_KKT_TOL = 1e-8

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _factor_spd(H, allow_jitter=True):
    """Cholesky with diagonal jitter retries on failure."""
    try:
        return cho_factor(H, lower=True, check_finite=False)
    except LinAlgError:
        if not allow_jitter:
            raise SolverError("symmetric factorization failed (singular system)")
    jitter = _JITTER0
    for _ in range(_JITTER_TRIES):
        try:
            return cho_factor(
                H + jitter * np.eye(H.shape[0]), lower=True, check_finite=False
            )
        except LinAlgError:
            jitter *= _JITTER_GROWTH
    raise SolverError(
        f"symmetric factorization failed after jitter up to {jitter:.1e}"
    )


def lssvr_fit(band_rows, r, mu_reg, sigma2):
    """Least-squares kernel regression of reflectances on band rows.

    Solves ``(K + mu_reg I) beta = r`` with K the Gaussian Gram matrix
    over ``band_rows``; fitted values are ``K beta``, so the residual
    ``r - fitted`` equals ``mu_reg * beta`` identically.

    Returns
    -------
    (beta, fitted) : two ndarrays of length L'.
    """
    band_rows = np.asarray(band_rows, dtype=float)
    if band_rows.ndim != 2:
        raise InputError("band_rows must be 2-D (bands, endmembers)")
    r = check_vector(r, "r")
    if r.size != band_rows.shape[0]:
        raise InputError(
            f"r has length {r.size}, expected {band_rows.shape[0]}"
        )
    mu_reg = float(mu_reg)
    if mu_reg < 0.0:
        raise ParameterError(f"mu_reg must be nonnegative, got {mu_reg}")
    sigma2 = check_sigma2(sigma2)
    d2 = cdist(band_rows, band_rows, metric="sqeuclidean")
    K = np.exp(-d2 / (2.0 * sigma2))
    H = K + mu_reg * np.eye(K.shape[0])
    factor = _factor_spd(H, allow_jitter=mu_reg > 0.0)
    beta = cho_solve(factor, r, check_finite=False)
    fitted = K @ beta
    return beta, fitted


@dataclass(frozen=True)
class DualSolution:
    """Optimal dual variables of the fixed-u subproblem."""

    beta: np.ndarray
    gamma: np.ndarray
    u: float
    mu_reg: float
    objective: float
    n_iter: int
    kkt: dict = field(default_factory=dict, compare=False)
    objective_path: tuple = ()


@dataclass(frozen=True)
class UnmixResult:
    """Per-pixel unmixing output.

    ``residuals`` is the model misfit on the selected bands, which equals
    ``mu_reg * beta`` at the optimum. ``objective_trace`` holds J(u) for
    every evaluation made by the outer search, in evaluation order.
    """

    alpha: np.ndarray
    u: float
    residuals: np.ndarray
    objective: float
    objective_trace: np.ndarray
    u_trace: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    linear_coef: np.ndarray  # unnormalized abundance direction M^T beta + gamma


@dataclass(frozen=True)
class LssvrResult:
    """Per-pixel kernel ridge regression output (no abundances)."""

    beta: np.ndarray
    fitted: np.ndarray
    residuals: np.ndarray


class SkhypeModel:
    """Shared per-scene context: endmember rows, Gram matrix, products.

    Immutable after construction; per-pixel solves only read from it, so
    instances are safe to share across worker threads.
    """

    def __init__(self, M, mu_reg, sigma2):
        self.M = check_endmembers(M, "M", min_bands=1)
        self.mu_reg = float(mu_reg)
        if self.mu_reg <= 0.0:
            raise ParameterError(f"mu_reg must be positive, got {mu_reg}")
        self.sigma2 = check_sigma2(sigma2)
        self.n_bands, self.n_endmembers = self.M.shape
        d2 = cdist(self.M, self.M, metric="sqeuclidean")
        self.K = np.exp(-d2 / (2.0 * self.sigma2))
        self.MMt = self.M @ self.M.T
        self.eye = np.eye(self.n_bands)

    # -- fixed-u dual ------------------------------------------------------

    def dual_objective(self, r, u, beta, gamma):
        """G(u, beta, gamma): concave dual of the fixed-u subproblem."""
        Ku_beta = u * (self.MMt @ beta) + (1.0 - u) * (self.K @ beta)
        Mgamma = self.M @ gamma
        quad = (
            beta @ Ku_beta
            + self.mu_reg * (beta @ beta)
            + 2.0 * u * (beta @ Mgamma)
            + u * (gamma @ gamma)
        )
        return float(-0.5 * quad + r @ beta)

    def dual_gradient(self, r, u, beta, gamma):
        """Gradient of G with respect to (beta, gamma)."""
        Ku_beta = u * (self.MMt @ beta) + (1.0 - u) * (self.K @ beta)
        g_beta = r - Ku_beta - self.mu_reg * beta - u * (self.M @ gamma)
        g_gamma = -u * (self.M.T @ beta) - u * gamma
        return g_beta, g_gamma

    def kkt_residuals(self, r, u, beta, gamma):
        g_beta, g_gamma = self.dual_gradient(r, u, beta, gamma)
        lam = -g_gamma  # multipliers of the gamma >= 0 constraints
        return {
            "stationarity_beta": float(np.max(np.abs(g_beta))),
            "dual_feasibility": float(max(0.0, -lam.min()) if lam.size else 0.0),
            "complementary_slackness": float(
                np.max(np.abs(lam * gamma)) if lam.size else 0.0
            ),
            "primal_feasibility": float(max(0.0, -gamma.min()) if gamma.size else 0.0),
        }

    def solve_fixed_u(self, r, u) -> DualSolution:
        """Maximize the dual at fixed u subject to gamma >= 0.

        Active-set iteration: solve the stationarity system with the
        current components of gamma pinned at zero, pin any free
        component that comes out negative, release one pinned component
        at a time when its multiplier has the wrong sign, and stop when
        the KKT conditions hold.
        """
        if not 0.0 < u < 1.0:
            raise ParameterError(f"u must lie strictly inside (0, 1), got {u}")
        r = np.asarray(r, dtype=float)
        R = self.n_endmembers
        active = np.zeros(R, dtype=bool)  # pinned gamma components
        base = (1.0 - u) * self.K + self.mu_reg * self.eye
        tol = 1e-10
        objective_path = []
        beta = None
        for n_iter in range(1, _ACTIVE_SET_MAX_ITER + 1):
            if np.any(active):
                Ma = self.M[:, active]
                H = base + u * (Ma @ Ma.T)
            else:
                H = base
            beta = cho_solve(_factor_spd(H), r, check_finite=False)
            t = self.M.T @ beta
            gamma = np.where(active, 0.0, -t)
            feasible = gamma.min() >= -tol
            if feasible:
                objective_path.append(self.dual_objective(r, u, beta, np.maximum(gamma, 0.0)))
            violated = ~active & (t > tol)
            if np.any(violated):
                active |= violated
                continue
            wrong = active & (t < -tol)
            if np.any(wrong):
                release = int(np.flatnonzero(wrong)[np.argmin(t[wrong])])
                active[release] = False
                continue
            gamma = np.maximum(gamma, 0.0)
            kkt = self.kkt_residuals(r, u, beta, gamma)
            if max(kkt.values()) > _KKT_TOL:
                raise SolverError(
                    "fixed-u dual solve violated KKT tolerances", details=kkt
                )
            return DualSolution(
                beta=beta,
                gamma=gamma,
                u=float(u),
                mu_reg=self.mu_reg,
                objective=self.dual_objective(r, u, beta, gamma),
                n_iter=n_iter,
                kkt=kkt,
                objective_path=tuple(objective_path),
            )
        kkt = self.kkt_residuals(r, u, beta, np.where(active, 0.0, -(self.M.T @ beta)))
        raise SolverError(
            f"active-set QP did not settle within {_ACTIVE_SET_MAX_ITER} iterations",
            details=kkt,
        )

    # -- recovery and outer search ----------------------------------------

    def recover(self, dual: DualSolution, r):
        """Primal solution from an optimal dual point.

        Returns ``(alpha, psi_coef, residuals, linear_coef)`` where
        ``alpha`` is the simplex-normalized abundance, ``psi_coef`` are the
        kernel expansion coefficients ``(1 - u) beta`` of the nonlinear
        term, and ``residuals`` the per-band model misfit.
        """
        t = self.M.T @ dual.beta + dual.gamma
        t = np.maximum(t, 0.0)
        scale = float(t.sum())
        if scale <= 0.0:
            raise DegenerateSolutionError(
                "abundance normalizer is non-positive; pixel has no usable "
                "linear component"
            )
        alpha = t / scale
        fitted = dual.u * (self.M @ t) + (1.0 - dual.u) * (self.K @ dual.beta)
        residuals = r - fitted
        psi_coef = (1.0 - dual.u) * dual.beta
        return alpha, psi_coef, residuals, t

    def minimize_balance(self, r, u_bounds=U_BOUNDS, u_tol=U_TOL) -> UnmixResult:
        """Golden-section search of J(u), the optimal dual value at fixed u.

        Each evaluation solves one fixed-u QP. The search stops when the
        bracket is narrower than ``u_tol``; the returned u is the bracket
        midpoint, re-solved once to produce the final solution.
        """
        a, b = float(u_bounds[0]), float(u_bounds[1])
        if not (0.0 < a < b < 1.0):
            raise ParameterError(f"u bounds must satisfy 0 < a < b < 1, got {u_bounds}")
        r = np.asarray(r, dtype=float)
        trace_u, trace_j = [], []

        def J(u):
            value = self.solve_fixed_u(r, u).objective
            trace_u.append(u)
            trace_j.append(value)
            return value

        x1 = b - _INVPHI * (b - a)
        x2 = a + _INVPHI * (b - a)
        f1, f2 = J(x1), J(x2)
        while (b - a) > u_tol:
            if f1 <= f2:
                b, x2, f2 = x2, x1, f1
                x1 = b - _INVPHI * (b - a)
                f1 = J(x1)
            else:
                a, x1, f1 = x1, x2, f2
                x2 = a + _INVPHI * (b - a)
                f2 = J(x2)
        u_final = 0.5 * (a + b)
        dual = self.solve_fixed_u(r, u_final)
        trace_u.append(u_final)
        trace_j.append(dual.objective)
        alpha, _, residuals, linear_coef = self.recover(dual, r)
        return UnmixResult(
            alpha=alpha,
            u=u_final,
            residuals=residuals,
            objective=dual.objective,
            objective_trace=np.array(trace_j),
            u_trace=np.array(trace_u),
            beta=dual.beta,
            gamma=dual.gamma,
            linear_coef=linear_coef,
        )


# ---------------------------------------------------------------------------
# Functional API
# ---------------------------------------------------------------------------

def skhype_dual_fixed_u(M, r, u, mu_reg, sigma2) -> DualSolution:
    """Solve the fixed-u dual subproblem for one pixel."""
    return SkhypeModel(M, mu_reg, sigma2).solve_fixed_u(
        np.asarray(r, dtype=float), float(u)
    )


def skhype_recover(dual: DualSolution, M, u=None):
    """Recover (alpha, psi coefficients, residuals) from a dual solution.

    ``u`` defaults to the one stored in the dual solution. The residuals
    equal ``mu_reg * beta`` at any exact dual optimum.
    """
    if u is not None and abs(float(u) - dual.u) > 1e-12:
        raise ParameterError("u does not match the dual solution")
    M = check_endmembers(M, "M", min_bands=1)
    t = M.T @ dual.beta + dual.gamma
    t = np.maximum(t, 0.0)
    scale = float(t.sum())
    if scale <= 0.0:
        raise DegenerateSolutionError(
            "abundance normalizer is non-positive; pixel has no usable "
            "linear component"
        )
    alpha = t / scale
    psi_coef = (1.0 - dual.u) * dual.beta
    residuals = dual.mu_reg * dual.beta
    return alpha, psi_coef, residuals


def dual_objective(M, r, u, mu_reg, sigma2, beta, gamma) -> float:
    """Evaluate the fixed-u dual objective at an arbitrary point."""
    model = SkhypeModel(M, mu_reg, sigma2)
    return model.dual_objective(
        np.asarray(r, dtype=float), float(u),
        np.asarray(beta, dtype=float), np.asarray(gamma, dtype=float),
    )


def dual_gradient(M, r, u, mu_reg, sigma2, beta, gamma):
    """Gradient of the fixed-u dual objective at an arbitrary point."""
    model = SkhypeModel(M, mu_reg, sigma2)
    return model.dual_gradient(
        np.asarray(r, dtype=float), float(u),
        np.asarray(beta, dtype=float), np.asarray(gamma, dtype=float),
    )


def minimize_Ju(M, r, mu_reg=DEFAULT_MU_REG, sigma2=None,
                u_bounds=U_BOUNDS, u_tol=U_TOL) -> UnmixResult:
    """Full per-pixel unmixing: inner QP solves, outer search on u.

    ``sigma2=None`` solves the bandwidth automatically for the default
    reference dictionary size.
    """
    M = check_endmembers(M, "M")
    if sigma2 is None:
        sigma2 = auto_params(gram_matrix(M, 1.0), DEFAULT_BANDWIDTH_TARGET).sigma2
    model = SkhypeModel(M, mu_reg, sigma2)
    return model.minimize_balance(
        np.asarray(r, dtype=float), u_bounds=u_bounds, u_tol=u_tol
    )


# ---------------------------------------------------------------------------
# Scene-level driver
# ---------------------------------------------------------------------------

@dataclass
class SceneUnmixResult:
    """Unmixing output for a whole scene.

    ``results[i]`` is None when pixel i failed; ``failures`` lists
    (pixel index, message) pairs.
    """

    results: list
    failures: list
    method: str
    n_endmembers: int
    sigma2: float
    mu_reg: float
    dictionary: BandDictionary | None
    elapsed_seconds: float

    @property
    def n_pixels(self) -> int:
        return len(self.results)

    @property
    def n_failures(self) -> int:
        return len(self.failures)

    def abundances(self) -> np.ndarray:
        """(N, R) abundance matrix; NaN rows for failures or non-abundance methods."""
        out = np.full((self.n_pixels, self.n_endmembers), np.nan)
        for i, res in enumerate(self.results):
            if isinstance(res, UnmixResult):
                out[i] = res.alpha
        return out

    def balances(self) -> np.ndarray:
        """Per-pixel linear/nonlinear balance u (NaN when not applicable)."""
        out = np.full(self.n_pixels, np.nan)
        for i, res in enumerate(self.results):
            if isinstance(res, UnmixResult):
                out[i] = res.u
        return out

    def residual_norms(self) -> np.ndarray:
        out = np.full(self.n_pixels, np.nan)
        for i, res in enumerate(self.results):
            if res is not None:
                out[i] = float(np.linalg.norm(res.residuals))
        return out


def _resolve_scene_inputs(pixels, M, dictionary, sigma2):
    M = check_endmembers(M, "M")
    pixels = check_pixels(pixels, n_bands=M.shape[0])
    if dictionary is not None:
        if isinstance(dictionary, BandDictionary):
            idx = np.asarray(dictionary.indices, dtype=int)
            if dictionary.n_bands != M.shape[0]:
                raise InputError(
                    f"dictionary was built for {dictionary.n_bands} bands, "
                    f"data has {M.shape[0]}"
                )
            if sigma2 is None:
                sigma2 = dictionary.sigma2
        else:
            idx = check_band_indices(dictionary, M.shape[0], "dictionary")
        M_sel = M[idx, :]
        pixels_sel = pixels[:, idx]
    else:
        M_sel = M
        pixels_sel = pixels
    if sigma2 is None:
        sigma2 = auto_params(gram_matrix(M, 1.0), DEFAULT_BANDWIDTH_TARGET).sigma2
    return pixels_sel, M_sel, float(sigma2)


def unmix_scene(pixels, M, dictionary=None, mu_reg=DEFAULT_MU_REG, sigma2=None,
                method="skhype", n_threads=1, u_bounds=U_BOUNDS,
                u_tol=U_TOL) -> SceneUnmixResult:
    """Unmix every pixel of a scene, optionally on a reduced band set.

    The bandwidth is taken from the dictionary when one is supplied,
    otherwise solved automatically on the full band set. Per-pixel
    failures are collected, not fatal. Results are deterministic and
    independent of ``n_threads``.
    """
    if method not in ("skhype", "lssvr"):
        raise ParameterError(f"method must be 'skhype' or 'lssvr', got {method!r}")
    pixels_sel, M_sel, sigma2 = _resolve_scene_inputs(pixels, M, dictionary, sigma2)
    n_pixels = pixels_sel.shape[0]
    results = [None] * n_pixels
    failures = []

    start = time.perf_counter()
    if method == "skhype":
        model = SkhypeModel(M_sel, mu_reg, sigma2)

        def solve_one(i):
            return model.minimize_balance(
                pixels_sel[i], u_bounds=u_bounds, u_tol=u_tol
            )
    else:
        d2 = cdist(M_sel, M_sel, metric="sqeuclidean")
        K = np.exp(-d2 / (2.0 * sigma2))
        H = K + float(mu_reg) * np.eye(K.shape[0])
        factor = _factor_spd(H, allow_jitter=float(mu_reg) > 0.0)

        def solve_one(i):
            r = pixels_sel[i]
            beta = cho_solve(factor, r, check_finite=False)
            fitted = K @ beta
            return LssvrResult(beta=beta, fitted=fitted, residuals=r - fitted)

    def run(i):
        try:
            results[i] = solve_one(i)
        except (SolverError, DegenerateSolutionError, ConvergenceError) as exc:
            failures.append((i, str(exc)))

    if n_threads and int(n_threads) > 1:
        with ThreadPoolExecutor(max_workers=int(n_threads)) as pool:
            list(pool.map(run, range(n_pixels)))
        failures.sort(key=lambda item: item[0])
    else:
        for i in range(n_pixels):
            run(i)
    elapsed = time.perf_counter() - start

    dict_obj = dictionary if isinstance(dictionary, BandDictionary) else None
    return SceneUnmixResult(
        results=results,
        failures=failures,
        method=method,
        n_endmembers=M_sel.shape[1],
        sigma2=sigma2,
        mu_reg=float(mu_reg),
        dictionary=dict_obj,
        elapsed_seconds=elapsed,
    )


def reconstruct_pixels(scene_result: SceneUnmixResult, M, dictionary=None) -> np.ndarray:
    """Model reconstruction of every pixel over the full band set.

    Extends each pixel's fitted model to all L bands: the linear trend
    uses the full endmember matrix, the kernel term evaluates the fitted
    expansion at every band row. Failed pixels reconstruct as NaN.
    """
    M = check_endmembers(M, "M")
    if dictionary is None:
        dictionary = scene_result.dictionary
    if dictionary is not None:
        idx = np.asarray(dictionary.indices, dtype=int)
        rows_sel = M[idx, :]
    else:
        rows_sel = M
    d2 = cdist(M, rows_sel, metric="sqeuclidean")
    cross = np.exp(-d2 / (2.0 * scene_result.sigma2))
    out = np.full((scene_result.n_pixels, M.shape[0]), np.nan)
    for i, res in enumerate(scene_result.results):
        if isinstance(res, UnmixResult):
            out[i] = res.u * (M @ res.linear_coef) \
                + (1.0 - res.u) * (cross @ res.beta)
        elif isinstance(res, LssvrResult):
            out[i] = cross @ res.beta
    return out


# ---------------------------------------------------------------------------
# Estimator wrapper
# ---------------------------------------------------------------------------

class SKHypeUnmixer(BaseEstimator):
    """Semi-parametric kernel unmixer with an sklearn-style surface.

    ``fit`` takes the endmember matrix (bands as rows); ``predict`` maps
    pixel reflectances to simplex abundances. A fitted
    :class:`BandDictionary` (or explicit index list) restricts the model
    to those bands; full-width pixel input is sliced internally.
    """

    def __init__(self, mu_reg=DEFAULT_MU_REG, sigma2=None, dictionary=None,
                 method="skhype", n_threads=1):
        self.mu_reg = mu_reg
        self.sigma2 = sigma2
        self.dictionary = dictionary
        self.method = method
        self.n_threads = n_threads

    def fit(self, M, y=None):
        M = check_endmembers(M, "M")
        self.endmembers_ = M
        _, _, self.sigma2_ = _resolve_scene_inputs(
            np.zeros((1, M.shape[0])), M, self.dictionary, self.sigma2
        )
        return self

    def _check_fitted(self):
        if not hasattr(self, "endmembers_"):
            raise NotFittedError(
                "SKHypeUnmixer is not fitted; call fit(endmembers) first"
            )

    def unmix(self, X) -> SceneUnmixResult:
        """Full per-pixel results for pixel matrix X of shape (N, L)."""
        self._check_fitted()
        return unmix_scene(
            X,
            self.endmembers_,
            dictionary=self.dictionary,
            mu_reg=self.mu_reg,
            sigma2=self.sigma2_,
            method=self.method,
            n_threads=self.n_threads,
        )

    def predict(self, X) -> np.ndarray:
        """Abundance matrix (N, R) for pixel matrix X of shape (N, L)."""
        return self.unmix(X).abundances()
