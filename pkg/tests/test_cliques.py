import numpy as np
import pytest

from bandclique import (
    BudgetExceededError,
    CliqueGraph,
    DimacsParseError,
    GramMatrix,
    InputError,
    build_adjacency,
    dimacs_read,
    dimacs_write,
    maximum_clique,
    maximum_clique_bruteforce,
)


def random_graph(rng, n, density):
    A = np.triu(rng.random((n, n)) < density, k=1)
    return CliqueGraph(A | A.T)


def complete_graph(n):
    A = ~np.eye(n, dtype=bool)
    return CliqueGraph(A)


# Five-vertex instance built to the documented constraints: bands 1 and 4
# are coherent below the threshold (edge present), bands 1 and 2 are not
# (edge absent), and the unique maximum clique is {1, 3, 4, 5} (1-based).
FIG_EDGES_1BASED = [(1, 3), (1, 4), (1, 5), (3, 4), (3, 5), (4, 5), (2, 3)]


def figure_instance_gram(mu0=0.3):
    V = np.full((5, 5), 0.6)  # above threshold: non-edges
    np.fill_diagonal(V, 1.0)
    for i, j in FIG_EDGES_1BASED:
        V[i - 1, j - 1] = V[j - 1, i - 1] = 0.1
    return GramMatrix(V, 1.0), mu0


class TestCliqueGraph:
    def test_validation(self):
        with pytest.raises(InputError):
            CliqueGraph(np.array([[False, True], [False, False]]))  # asymmetric
        bad = np.ones((2, 2), dtype=bool)
        with pytest.raises(InputError):
            CliqueGraph(bad)  # true diagonal

    def test_from_edges_and_edge_list(self):
        g = CliqueGraph.from_edges(4, [(0, 1), (2, 3)])
        assert g.n == 4 and g.n_edges == 2
        assert g.edge_list() == [(0, 1), (2, 3)]
        with pytest.raises(InputError):
            CliqueGraph.from_edges(3, [(0, 0)])
        with pytest.raises(InputError):
            CliqueGraph.from_edges(3, [(0, 5)])


class TestBuildAdjacency:
    def test_orthonormal_case_gives_complete_graph(self):
        K = GramMatrix(np.eye(6), 1.0)
        g = build_adjacency(K, 0.1)
        assert g.n_edges == 6 * 5 // 2

    def test_all_above_threshold_gives_edgeless_graph(self):
        V = np.full((4, 4), 0.9)
        np.fill_diagonal(V, 1.0)
        g = build_adjacency(GramMatrix(V, 1.0), 0.5)
        assert g.n_edges == 0

    def test_boundary_counts_as_edge(self):
        V = np.eye(3)
        V[0, 1] = V[1, 0] = 0.25
        g = build_adjacency(GramMatrix(V, 1.0), 0.25)
        assert g.adjacency[0, 1]

    def test_figure_instance_edge_set(self):
        K, mu0 = figure_instance_gram()
        g = build_adjacency(K, mu0)
        expected = sorted((min(i, j) - 1, max(i, j) - 1) for i, j in FIG_EDGES_1BASED)
        assert g.edge_list() == expected
        assert g.adjacency[0, 3]       # 1-4 coherent below threshold
        assert not g.adjacency[0, 1]   # 1-2 above threshold


class TestMaximumClique:
    def test_complete_graph(self):
        clique = maximum_clique(complete_graph(5))
        assert clique.vertices == (0, 1, 2, 3, 4)

    def test_figure_instance(self):
        K, mu0 = figure_instance_gram()
        clique = maximum_clique(build_adjacency(K, mu0))
        assert clique.vertices == (0, 2, 3, 4)  # {1,3,4,5} 1-based

    def test_edgeless_returns_lowest_vertex(self):
        g = CliqueGraph(np.zeros((4, 4), dtype=bool))
        clique = maximum_clique(g)
        assert clique.vertices == (0,)

    def test_single_vertex(self):
        g = CliqueGraph(np.zeros((1, 1), dtype=bool))
        assert maximum_clique(g).vertices == (0,)

    @pytest.mark.parametrize("density", [0.2, 0.5, 0.8])
    def test_matches_bruteforce(self, density):
        rng = np.random.default_rng(hash(density) % 2**32)
        for _ in range(25):
            n = int(rng.integers(4, 17))
            g = random_graph(rng, n, density)
            assert maximum_clique(g).size == maximum_clique_bruteforce(g).size

    def test_size_invariant_under_relabeling(self):
        rng = np.random.default_rng(17)
        for _ in range(10):
            n = int(rng.integers(6, 15))
            g = random_graph(rng, n, 0.5)
            size = maximum_clique(g).size
            perm = rng.permutation(n)
            relabeled = CliqueGraph(g.adjacency[np.ix_(perm, perm)])
            assert maximum_clique(relabeled).size == size

    def test_adding_edges_never_shrinks_clique(self):
        rng = np.random.default_rng(23)
        for _ in range(10):
            n = 12
            g = random_graph(rng, n, 0.2)
            size = maximum_clique(g).size
            A = g.adjacency.copy()
            missing = [(i, j) for i in range(n) for j in range(i + 1, n) if not A[i, j]]
            rng.shuffle(missing)
            for i, j in missing[:20]:
                A[i, j] = A[j, i] = True
                new_size = maximum_clique(CliqueGraph(A)).size
                assert new_size >= size
                size = new_size

    def test_deterministic_vertex_set(self):
        rng = np.random.default_rng(31)
        g = random_graph(rng, 14, 0.5)
        assert maximum_clique(g).vertices == maximum_clique(g).vertices

    def test_node_budget(self):
        rng = np.random.default_rng(41)
        g = random_graph(rng, 30, 0.7)
        with pytest.raises(BudgetExceededError):
            maximum_clique(g, node_budget=2)


class TestDimacs:
    def test_read_path_graph(self):
        g = dimacs_read("p edge 3 2\ne 1 2\ne 2 3\n")
        assert g.n == 3
        assert g.edge_list() == [(0, 1), (1, 2)]

    def test_write_triangle(self):
        text = dimacs_write(complete_graph(3))
        assert text.splitlines()[0] == "p edge 3 3"
        assert sorted(text.splitlines()[1:]) == ["e 1 2", "e 1 3", "e 2 3"]

    def test_comments_and_blanks_ignored(self):
        g = dimacs_read("c a comment\n\np edge 2 1\nc more\ne 1 2\n")
        assert g.n_edges == 1

    def test_roundtrip_random(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            g = random_graph(rng, int(rng.integers(2, 20)), 0.4)
            back = dimacs_read(dimacs_write(g))
            np.testing.assert_array_equal(back.adjacency, g.adjacency)

    @pytest.mark.parametrize(
        "text,line",
        [
            ("e 1 2\np edge 2 1\n", 1),          # edge before header
            ("p edge 2 1\ne 1 3\n", 2),          # vertex out of range
            ("p edge 2 1\ne 1 1\n", 2),          # self-loop
            ("p edge x 1\ne 1 2\n", 1),          # non-integer size
            ("p edge 2 1\ne 1 two\n", 2),        # non-integer vertex
            ("p edge 2 2\ne 1 2\n", 1),          # count mismatch
            ("q edge 2 1\n", 1),                 # unknown line
        ],
    )
    def test_parse_errors_carry_line_numbers(self, text, line):
        with pytest.raises(DimacsParseError) as excinfo:
            dimacs_read(text)
        assert excinfo.value.line == line

    def test_missing_header(self):
        with pytest.raises(DimacsParseError):
            dimacs_read("c only comments\n")
