"""Coherence graphs and exact maximum-clique search.

Band selection at a fixed coherence threshold reduces to a maximum-clique
problem: connect two bands when their kernel coherence does not exceed the
threshold, then find the largest set of pairwise-connected bands. The
solver here is a branch-and-bound with a greedy sequential-coloring upper
bound over Python-int bitsets; it is exact and deterministic. A plain
exhaustive solver is kept alongside for cross-checking, and DIMACS ascii
import/export allows comparisons with external solvers.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass

import numpy as np

from .exceptions import BudgetExceededError, DimacsParseError, InputError, SolverError
from .kernels import gram_values


@dataclass(frozen=True)
class CliqueGraph:
    """Undirected graph as a symmetric boolean adjacency matrix.

    The diagonal is always false; vertices are 0-based.
    """

    adjacency: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.adjacency, dtype=bool)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise InputError("adjacency must be a square matrix")
        if A.shape[0] < 1:
            raise InputError("graph must have at least one vertex")
        if not np.array_equal(A, A.T):
            raise InputError("adjacency must be symmetric")
        if np.any(np.diag(A)):
            raise InputError("adjacency diagonal must be false")
        object.__setattr__(self, "adjacency", A)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return int(np.count_nonzero(self.adjacency)) // 2

    @classmethod
    def from_edges(cls, n, edges) -> "CliqueGraph":
        """Build from 0-based (i, j) pairs."""
        A = np.zeros((n, n), dtype=bool)
        for i, j in edges:
            if i == j:
                raise InputError(f"self-loop ({i}, {j}) not allowed")
            if not (0 <= i < n and 0 <= j < n):
                raise InputError(f"edge ({i}, {j}) out of range for n={n}")
            A[i, j] = A[j, i] = True
        return cls(A)

    def edge_list(self):
        """Sorted 0-based (i, j) pairs with i < j."""
        iu, ju = np.nonzero(np.triu(self.adjacency, k=1))
        return list(zip(iu.tolist(), ju.tolist()))

    def bitsets(self):
        """Neighbor sets as Python-int bitmasks."""
        rows = self.adjacency
        return [
            int.from_bytes(np.packbits(rows[v], bitorder="little").tobytes(), "little")
            for v in range(self.n)
        ]


@dataclass(frozen=True)
class Clique:
    """A set of pairwise-adjacent vertices, sorted ascending."""

    vertices: tuple
    size: int

    def __post_init__(self):
        verts = tuple(sorted(int(v) for v in self.vertices))
        if len(set(verts)) != len(verts):
            raise InputError("clique vertices must be distinct")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "size", len(verts))


def build_adjacency(K, mu0) -> CliqueGraph:
    """Adjacency of the coherence graph at threshold ``mu0``.

    Vertices are bands; an edge joins i != j iff ``|K[i, j]| <= mu0``.
    The boundary case ``|K[i, j]| == mu0`` counts as an edge.
    """
    V = gram_values(K)
    mu0 = float(mu0)
    A = np.abs(V) <= mu0
    np.fill_diagonal(A, False)
    return CliqueGraph(A)


def _degeneracy_order(G: CliqueGraph):
    """Smallest-last vertex elimination order, ties broken by lowest index."""
    A = G.adjacency
    n = G.n
    degree = A.sum(axis=1).astype(int)
    alive = np.ones(n, dtype=bool)
    order = []
    for _ in range(n):
        candidates = np.flatnonzero(alive)
        v = candidates[np.argmin(degree[candidates])]
        order.append(int(v))
        alive[v] = False
        degree[A[v] & alive] -= 1
    return order


def _color_sort(candidates, adj_bits):
    """Greedy sequential coloring of a candidate list.

    Returns the candidates regrouped by color class together with the
    per-vertex upper bound (its 1-based color number). Bounds come out
    non-decreasing, so iterating from the tail visits the loosest bounds
    first.
    """
    classes = []  # (bitmask, members)
    for v in candidates:
        for idx, (mask, members) in enumerate(classes):
            if not (mask & adj_bits[v]):
                classes[idx] = (mask | (1 << v), members + [v])
                break
        else:
            classes.append((1 << v, [v]))
    order, bounds = [], []
    for color, (_, members) in enumerate(classes, start=1):
        order.extend(members)
        bounds.extend([color] * len(members))
    return order, bounds


def _bits_to_list(mask):
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def maximum_clique(G: CliqueGraph, node_budget=None) -> Clique:
    """Exact maximum clique via coloring-bounded branch and bound.

    Deterministic: ties between equal-size cliques are resolved by the
    fixed search order (degeneracy-ordered root, ascending index within
    color classes), so identical graphs always return the same vertex set.
    An edgeless graph returns the single vertex 0.

    Parameters
    ----------
    G : CliqueGraph
    node_budget : int, optional
        Abort with :class:`BudgetExceededError` after this many search
        nodes instead of returning a possibly sub-optimal clique.
    """
    n = G.n
    adj_bits = G.bitsets()
    best = [0]  # any single vertex is a clique; lowest index by convention
    nodes = [0]
    budget = None if node_budget is None else int(node_budget)

    # Deep instances recurse one level per clique vertex.
    depth_needed = n + 64
    if sys.getrecursionlimit() < depth_needed:
        sys.setrecursionlimit(depth_needed)

    def expand(current, candidates):
        nonlocal best
        nodes[0] += 1
        if budget is not None and nodes[0] > budget:
            raise BudgetExceededError(
                f"maximum-clique search exceeded node budget {budget}"
            )
        order, bounds = _color_sort(candidates, adj_bits)
        for i in range(len(order) - 1, -1, -1):
            if len(current) + bounds[i] <= len(best):
                return
            v = order[i]
            current.append(v)
            if len(current) > len(best):
                best = list(current)
            sub_mask = adj_bits[v]
            sub = [u for u in order[:i] if (sub_mask >> u) & 1]
            if sub:
                expand(current, sub)
            current.pop()

    expand([], _degeneracy_order(G))

    clique = Clique(tuple(best), len(best))
    _verify_clique(G, clique)
    return clique


def maximum_clique_bruteforce(G: CliqueGraph) -> Clique:
    """Reference exhaustive solver.

    Depth-first enumeration over all vertex subsets with a size-only
    pruning rule; exponential, intended for cross-checking the main
    solver on small graphs.
    """
    adj_bits = G.bitsets()
    best = [0]

    def extend(current, pool):
        nonlocal best
        while pool:
            if len(current) + pool.bit_count() <= len(best):
                return
            low = pool & -pool
            v = low.bit_length() - 1
            pool ^= low
            current.append(v)
            if len(current) > len(best):
                best = list(current)
            extend(current, pool & adj_bits[v])
            current.pop()

    extend([], (1 << G.n) - 1)
    clique = Clique(tuple(best), len(best))
    _verify_clique(G, clique)
    return clique


def _verify_clique(G: CliqueGraph, clique: Clique):
    A = G.adjacency
    verts = clique.vertices
    for a in range(len(verts)):
        for b in range(a + 1, len(verts)):
            if not A[verts[a], verts[b]]:
                raise SolverError(
                    f"internal error: returned set is not a clique "
                    f"({verts[a]}, {verts[b]} not adjacent)"
                )


# ---------------------------------------------------------------------------
# DIMACS ascii graph format ("p edge n m" header, 1-based "e i j" lines)
# ---------------------------------------------------------------------------

def dimacs_read(text) -> CliqueGraph:
    """Parse DIMACS ascii into a graph.

    Comment lines start with 'c'; the header must precede every edge line;
    the declared edge count must match the number of edge lines.
    """
    n = None
    m_declared = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        tokens = line.split()
        if tokens[0] == "p":
            if n is not None:
                raise DimacsParseError("duplicate problem line", lineno)
            if len(tokens) != 4 or tokens[1] != "edge":
                raise DimacsParseError(
                    f"expected 'p edge <n> <m>', got {line!r}", lineno
                )
            try:
                n, m_declared = int(tokens[2]), int(tokens[3])
            except ValueError:
                raise DimacsParseError(
                    f"non-integer vertex/edge count in {line!r}", lineno
                ) from None
            if n < 1 or m_declared < 0:
                raise DimacsParseError(
                    f"invalid sizes n={n}, m={m_declared}", lineno
                )
        elif tokens[0] == "e":
            if n is None:
                raise DimacsParseError("edge line before problem line", lineno)
            if len(tokens) != 3:
                raise DimacsParseError(f"expected 'e <i> <j>', got {line!r}", lineno)
            try:
                i, j = int(tokens[1]), int(tokens[2])
            except ValueError:
                raise DimacsParseError(
                    f"non-integer vertex in {line!r}", lineno
                ) from None
            if not (1 <= i <= n and 1 <= j <= n):
                raise DimacsParseError(
                    f"vertex out of range in {line!r} (n={n})", lineno
                )
            if i == j:
                raise DimacsParseError(f"self-loop in {line!r}", lineno)
            edges.append((i - 1, j - 1))
        else:
            raise DimacsParseError(f"unrecognized line {line!r}", lineno)
    if n is None:
        raise DimacsParseError("missing problem line", 1)
    if len(edges) != m_declared:
        raise DimacsParseError(
            f"header declares {m_declared} edges but {len(edges)} edge lines found",
            1,
        )
    return CliqueGraph.from_edges(n, edges)


def dimacs_write(G: CliqueGraph) -> str:
    """Serialize a graph to DIMACS ascii (edges once, i < j, 1-based)."""
    edges = G.edge_list()
    lines = [f"p edge {G.n} {len(edges)}"]
    lines.extend(f"e {i + 1} {j + 1}" for i, j in edges)
    return "\n".join(lines) + "\n"
