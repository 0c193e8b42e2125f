"""Band selection strategies.

Three ways to pick a reduced band set from an endmember matrix:

* greedy coherence screening (first band kept, later bands admitted only
  while the dictionary coherence stays at or below the threshold),
* exact maximum-clique search on the coherence graph, which returns the
  largest band set satisfying the same threshold,
* kernel k-means clustering with one representative band per cluster and
  a linear size penalty for order selection (no coherence guarantee).

The first two derive their threshold and bandwidth automatically from a
target dictionary size; the clustered baseline takes its Gram matrix as
given. Sklearn-style wrappers at the bottom expose the strategies as
band-axis feature selectors.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .cliques import build_adjacency, maximum_clique
from .exceptions import InputError, ParameterError, SolverError
from .kernels import GramMatrix, coherence, gram_matrix, gram_power, gram_values
from .params import auto_params
from .validation import as_rng, as_seed_sequence, check_endmembers, check_positive_int

KKM_MAX_ITER = 300


@dataclass(frozen=True)
class BandDictionary:
    """A selected band subset with the parameters that produced it."""

    indices: tuple
    n_bands: int
    sigma2: float
    mu0: float | None
    coherence: float
    strategy: str
    target_size: int | None = None

    def __post_init__(self):
        idx = tuple(sorted(int(i) for i in self.indices))
        if len(idx) < 1:
            raise InputError("dictionary must contain at least one band")
        if len(set(idx)) != len(idx):
            raise InputError("dictionary indices must be distinct")
        if idx[0] < 0 or idx[-1] >= self.n_bands:
            raise InputError(
                f"dictionary indices out of range for {self.n_bands} bands"
            )
        if self.mu0 is not None and self.coherence > self.mu0:
            raise InputError(
                f"dictionary coherence {self.coherence} exceeds threshold {self.mu0}"
            )
        object.__setattr__(self, "indices", idx)

    @property
    def size(self) -> int:
        return len(self.indices)


def _resolve(K1, M):
    setting = auto_params(K1, M)
    Ks = gram_power(K1, setting.sigma2)
    return setting, Ks


def greedy_members(V, mu0, order):
    """Greedy screen at a fixed threshold on a raw kernel matrix.

    The first band of ``order`` always joins; each later band joins iff
    its largest absolute kernel value against the current members stays
    at or below ``mu0``. Returns the sorted member indices.
    """
    members = [int(order[0])]
    for band in order[1:]:
        band = int(band)
        if np.max(np.abs(V[band, members])) <= mu0:
            members.append(band)
    return tuple(sorted(members))


def _check_order(order, L):
    if order is None:
        return np.arange(L)
    order = np.asarray(order, dtype=int)
    if order.ndim != 1 or order.size != L or np.unique(order).size != L \
            or order.min() < 0 or order.max() >= L:
        raise InputError("order must be a permutation of range(L)")
    return order


def gcbs(K1: GramMatrix, M, order=None) -> BandDictionary:
    """Greedy coherence-based band selection.

    Starting from the first band of ``order`` (natural order by default),
    each subsequent band joins the dictionary iff its largest absolute
    kernel value against the current members stays at or below the
    threshold 1/(M-1). The bandwidth is solved automatically from (K1, M).
    """
    setting, Ks = _resolve(K1, M)
    order = _check_order(order, K1.n_bands)
    indices = greedy_members(Ks.values, setting.mu0, order)
    return BandDictionary(
        indices=indices,
        n_bands=K1.n_bands,
        sigma2=setting.sigma2,
        mu0=setting.mu0,
        coherence=coherence(Ks, indices),
        strategy="GCBS",
        target_size=setting.target_size,
    )


def clique_members(V, mu0, node_budget=None):
    """Exact largest admissible band set at a fixed threshold."""
    graph = build_adjacency(V, mu0)
    return maximum_clique(graph, node_budget=node_budget).vertices


def ccbs(K1: GramMatrix, M, node_budget=None) -> BandDictionary:
    """Clique coherence-based band selection.

    Same threshold and bandwidth as :func:`gcbs`, but the dictionary is
    an exact maximum clique of the coherence graph, so its cardinality is
    the largest achievable at that threshold (and in particular never
    smaller than any greedy result).
    """
    setting, Ks = _resolve(K1, M)
    indices = clique_members(Ks.values, setting.mu0, node_budget=node_budget)
    return BandDictionary(
        indices=indices,
        n_bands=K1.n_bands,
        sigma2=setting.sigma2,
        mu0=setting.mu0,
        coherence=coherence(Ks, indices),
        strategy="CCBS",
        target_size=setting.target_size,
    )


# ---------------------------------------------------------------------------
# Kernel k-means baseline
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClusterState:
    """Result of one kernel k-means run."""

    assignments: np.ndarray
    n_clusters: int
    error: float
    n_iter: int

    def __post_init__(self):
        a = np.asarray(self.assignments, dtype=int)
        counts = np.bincount(a, minlength=self.n_clusters)
        if a.min() < 0 or a.max() >= self.n_clusters:
            raise InputError("assignments out of range")
        if np.any(counts == 0):
            raise InputError("every cluster must be non-empty")
        object.__setattr__(self, "assignments", a)


def _cluster_distances(K, assignments, n_clusters):
    """Squared feature-space distances of every point to every centroid.

    Uses the kernel expansion
    ``K[l,l] - 2/N_k sum_i K[l,i] + 1/N_k^2 sum_ij K[i,j]``
    with sums over cluster members.
    """
    L = K.shape[0]
    onehot = np.zeros((L, n_clusters))
    onehot[np.arange(L), assignments] = 1.0
    counts = onehot.sum(axis=0)
    cross = K @ onehot                      # (L, k): sum_i in C_k K[l, i]
    within = np.einsum("lk,lj,jk->k", onehot, K, onehot)  # sum_ij in C_k
    d2 = np.diag(K)[:, None] - 2.0 * cross / counts + within / counts**2
    return d2


def _fix_empty_clusters(assignments, K, n_clusters):
    """Re-seed each empty cluster with the currently worst-assigned point.

    Only points that are not sole members of their cluster are eligible,
    so every fix strictly increases the number of non-empty clusters.
    """
    assignments = assignments.copy()
    while True:
        counts = np.bincount(assignments, minlength=n_clusters)
        empty = np.flatnonzero(counts == 0)
        if empty.size == 0:
            return assignments
        d2 = _fix_distances(K, assignments, counts)
        movable = counts[assignments] > 1
        if not np.any(movable):
            raise SolverError("cannot re-seed empty cluster: all clusters singleton")
        own = d2.copy()
        own[~movable] = -np.inf
        worst = int(np.argmax(own))
        assignments[worst] = empty[0]


def _fix_distances(K, assignments, counts):
    """Distance of each point to its own centroid (non-empty clusters)."""
    L = K.shape[0]
    nonempty = np.flatnonzero(counts > 0)
    remap = -np.ones(counts.size, dtype=int)
    remap[nonempty] = np.arange(nonempty.size)
    d2 = _cluster_distances(K, remap[assignments], nonempty.size)
    return d2[np.arange(L), remap[assignments]]


def _seed_assignments(K, n_clusters, rng):
    """Greedy plus-plus style seeding in kernel distance."""
    L = K.shape[0]
    diag = np.diag(K)
    point_d2 = diag[:, None] + diag[None, :] - 2.0 * K  # pairwise, exact 0 diag-ish
    centers = [int(rng.integers(L))]
    while len(centers) < n_clusters:
        closest = point_d2[:, centers].min(axis=1)
        closest = np.maximum(closest, 0.0)
        closest[centers] = 0.0
        total = closest.sum()
        if total <= 0.0:
            remaining = np.setdiff1d(np.arange(L), centers)
            centers.append(int(rng.choice(remaining)))
        else:
            centers.append(int(rng.choice(L, p=closest / total)))
    return np.argmin(point_d2[:, centers], axis=1)


def kkm_cluster(K, n_clusters, seed=0, init=None, max_iter=KKM_MAX_ITER) -> ClusterState:
    """Lloyd-style kernel k-means on a precomputed kernel matrix.

    ``K`` may be a :class:`GramMatrix` or any symmetric positive
    semidefinite matrix. The clustering error is re-checked to be
    non-increasing after every iteration; a violation raises
    :class:`SolverError`. ``init`` overrides the seeded initial
    assignment (mainly for cross-checking against explicit k-means).
    """
    K = gram_values(K)
    L = K.shape[0]
    n_clusters = check_positive_int(n_clusters, 1, "n_clusters")
    if n_clusters > L:
        raise ParameterError(f"n_clusters={n_clusters} exceeds {L} bands")
    rng = as_rng(seed)
    if init is None:
        assignments = _seed_assignments(K, n_clusters, rng)
    else:
        assignments = np.asarray(init, dtype=int)
        if assignments.shape != (L,) or assignments.min() < 0 \
                or assignments.max() >= n_clusters:
            raise InputError("init must assign every band to a cluster in range")
    assignments = _fix_empty_clusters(assignments, K, n_clusters)

    prev_error = np.inf
    error = _clustering_error(K, assignments, n_clusters)
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        d2 = _cluster_distances(K, assignments, n_clusters)
        new_assignments = np.argmin(d2, axis=1)
        new_assignments = _fix_empty_clusters(new_assignments, K, n_clusters)
        new_error = _clustering_error(K, new_assignments, n_clusters)
        if new_error > error + 1e-10 * max(1.0, abs(error)):
            raise SolverError(
                "kernel k-means error increased",
                details={"previous": error, "current": new_error},
            )
        converged = np.array_equal(new_assignments, assignments)
        assignments, prev_error, error = new_assignments, error, new_error
        if converged:
            break
    return ClusterState(
        assignments=assignments, n_clusters=n_clusters, error=error, n_iter=n_iter
    )


def _clustering_error(K, assignments, n_clusters):
    d2 = _cluster_distances(K, assignments, n_clusters)
    return float(d2[np.arange(K.shape[0]), assignments].sum())


def cluster_representatives(K, state: ClusterState) -> np.ndarray:
    """Pick the band closest to each cluster centroid (lowest index on ties)."""
    K = gram_values(K)
    d2 = _cluster_distances(K, state.assignments, state.n_clusters)
    reps = []
    for k in range(state.n_clusters):
        members = np.flatnonzero(state.assignments == k)
        reps.append(int(members[np.argmin(d2[members, k])]))
    return np.sort(np.array(reps))


def gkkm_select(K: GramMatrix, penalty, m_grid, restarts=5, seed=0,
                return_details=False):
    """Kernel k-means band selection with penalized order selection.

    For each candidate cluster count in ``m_grid``, keeps the best of
    ``restarts`` independently seeded runs (ties broken by restart rank),
    then picks the count minimizing ``error + penalty * count``. The
    dictionary holds one representative band per cluster; its coherence
    is recorded but not constrained.
    """
    if not isinstance(K, GramMatrix):
        raise InputError("K must be a GramMatrix")
    penalty = float(penalty)
    if penalty < 0.0:
        raise ParameterError(f"penalty must be nonnegative, got {penalty}")
    restarts = check_positive_int(restarts, 1, "restarts")
    m_values = sorted(set(int(m) for m in m_grid))
    if not m_values:
        raise ParameterError("m_grid must be non-empty")
    if m_values[0] < 1 or m_values[-1] > K.n_bands:
        raise ParameterError(
            f"m_grid must lie within [1, {K.n_bands}], got {m_values}"
        )

    streams = as_seed_sequence(seed).spawn(len(m_values) * restarts)
    best_states = {}
    for mi, m in enumerate(m_values):
        best = None
        for r in range(restarts):
            rng = np.random.default_rng(streams[mi * restarts + r])
            state = kkm_cluster(K, m, seed=rng)
            if best is None or state.error < best.error:
                best = state
        best_states[m] = best
    scores = {m: best_states[m].error + penalty * m for m in m_values}
    chosen = min(m_values, key=lambda m: (scores[m], m))
    state = best_states[chosen]
    indices = cluster_representatives(K, state)
    dictionary = BandDictionary(
        indices=tuple(int(i) for i in indices),
        n_bands=K.n_bands,
        sigma2=K.sigma2,
        mu0=None,
        coherence=coherence(K, indices),
        strategy="GKKM",
        target_size=chosen,
    )
    if return_details:
        return dictionary, {
            "errors": {m: best_states[m].error for m in m_values},
            "scores": scores,
            "state": state,
        }
    return dictionary


# ---------------------------------------------------------------------------
# Estimator wrappers
# ---------------------------------------------------------------------------

class _BandSelectorMixin(TransformerMixin):
    """Shared transform logic: select fitted band columns from pixel data."""

    def _check_fitted(self):
        if not hasattr(self, "dictionary_"):
            raise NotFittedError(
                f"{type(self).__name__} is not fitted; call fit(endmembers) first"
            )

    def transform(self, X):
        """Select the fitted bands from pixel data of shape (n, L)."""
        self._check_fitted()
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_bands_in_:
            raise InputError(
                f"X must have {self.n_bands_in_} band columns"
            )
        return X[:, self.indices_]

    def transform_endmembers(self, M):
        """Select the fitted band rows from an endmember matrix (L, R)."""
        self._check_fitted()
        M = check_endmembers(M, "M")
        if M.shape[0] != self.n_bands_in_:
            raise InputError(f"M must have {self.n_bands_in_} band rows")
        return M[self.indices_, :]

    def get_support(self, indices=False):
        self._check_fitted()
        if indices:
            return self.indices_.copy()
        mask = np.zeros(self.n_bands_in_, dtype=bool)
        mask[self.indices_] = True
        return mask

    def _store(self, dictionary: BandDictionary):
        self.dictionary_ = dictionary
        self.indices_ = np.array(dictionary.indices, dtype=int)
        self.n_bands_in_ = dictionary.n_bands
        self.sigma2_ = dictionary.sigma2
        self.mu0_ = dictionary.mu0
        self.coherence_ = dictionary.coherence
        self.n_selected_ = dictionary.size
        return self


class CoherenceBandSelector(_BandSelectorMixin, BaseEstimator):
    """Band selector enforcing a dictionary coherence threshold.

    Parameters
    ----------
    target_size : int
        Desired dictionary size M; sets the threshold to 1/(M-1) and the
        bandwidth via the automatic mean-coherence solve. The number of
        selected bands may differ from M.
    strategy : {"ccbs", "gcbs"}
        Exact maximum-clique selection or greedy screening.
    order : array_like, optional
        Band permutation for the greedy strategy (natural order default).
    node_budget : int, optional
        Search-node cap for the clique solver.

    Attributes
    ----------
    indices_ : ndarray of selected band indices (sorted, 0-based)
    sigma2_, mu0_, coherence_ : resolved parameters of the dictionary
    dictionary_ : the full :class:`BandDictionary`
    """

    def __init__(self, target_size=30, strategy="ccbs", order=None, node_budget=None):
        self.target_size = target_size
        self.strategy = strategy
        self.order = order
        self.node_budget = node_budget

    def fit(self, M, y=None):
        """Fit on an endmember matrix with bands as rows, shape (L, R)."""
        M = check_endmembers(M, "M")
        K1 = gram_matrix(M, 1.0)
        if self.strategy == "ccbs":
            dictionary = ccbs(K1, self.target_size, node_budget=self.node_budget)
        elif self.strategy == "gcbs":
            dictionary = gcbs(K1, self.target_size, order=self.order)
        else:
            raise ParameterError(
                f"strategy must be 'ccbs' or 'gcbs', got {self.strategy!r}"
            )
        return self._store(dictionary)


class KernelKMeansBandSelector(_BandSelectorMixin, BaseEstimator):
    """Band selector clustering bands in feature space.

    Picks the cluster count from ``m_grid`` by minimizing the clustering
    error plus ``penalty`` per cluster, then keeps the band closest to
    each centroid. ``sigma2="auto"`` solves the bandwidth for a reference
    dictionary size of ``reference_size``.
    """

    def __init__(self, m_grid=(2, 40), penalty=4.0, restarts=5, sigma2="auto",
                 reference_size=30, random_state=0):
        self.m_grid = m_grid
        self.penalty = penalty
        self.restarts = restarts
        self.sigma2 = sigma2
        self.reference_size = reference_size
        self.random_state = random_state

    def fit(self, M, y=None):
        M = check_endmembers(M, "M")
        K1 = gram_matrix(M, 1.0)
        if self.sigma2 == "auto":
            sigma2 = auto_params(K1, self.reference_size).sigma2
        else:
            sigma2 = float(self.sigma2)
        K = gram_power(K1, sigma2)
        lo, hi = (min(self.m_grid), max(self.m_grid))
        grid = range(int(lo), int(hi) + 1)
        dictionary = gkkm_select(
            K, self.penalty, grid, restarts=self.restarts, seed=self.random_state
        )
        return self._store(dictionary)
