import networkx as nx
import numpy as np
import pytest

from cliqueopf_core.chordal import (SparsityGraph, TermKind, assign_coordinators, build_graph, decompose,
                                    decomposition_to_json, fill_in, is_chordal, is_perfect_elimination_ordering,
                                    maximal_cliques, mcs_order)
from cliqueopf_core.netcase import build_cost_matrix, generate_radial

RING_EDGES = [(0, 1), (0, 2), (1, 3), (2, 3), (3, 4)]


def ring5_graph():
    return SparsityGraph(5, frozenset(RING_EDGES))


def random_graph(n, p, seed):
    g = nx.gnp_random_graph(n, p, seed=seed)
    return SparsityGraph(n, frozenset(g.edges()))


class TestSparsityGraph:
    def test_build_graph_ignores_tiny_entries(self):
        M = np.array([[1, 1e-13, 2], [1e-13, 1, 0], [2, 0, 1]], dtype=complex)
        assert build_graph(M).edges == frozenset({(0, 2)})

    def test_edges_are_normalized(self):
        assert SparsityGraph(3, frozenset({(2, 0)})).edges == frozenset({(0, 2)})

    def test_rejects_bad_edges(self):
        with pytest.raises(ValueError, match="self-loop"):
            SparsityGraph(3, frozenset({(1, 1)}))
        with pytest.raises(ValueError, match="out of range"):
            SparsityGraph(3, frozenset({(0, 3)}))


class TestOrdering:
    def test_ring5_mcs(self):
        assert mcs_order(ring5_graph()) == (4, 3, 2, 1, 0)

    def test_ring5_is_not_chordal(self):
        assert not is_chordal(ring5_graph())

    def test_fill_makes_peo(self):
        for seed in range(20):
            g = random_graph(9, 0.3, seed)
            c = fill_in(g, mcs_order(g))
            assert is_perfect_elimination_ordering(c.graph, c.order)
            assert is_chordal(c.graph)
            assert g.edges <= c.graph.edges

    def test_chordal_graph_needs_no_fill(self):
        for seed in range(10):
            g = random_graph(8, 0.4, seed)
            chordal = fill_in(g, mcs_order(g)).graph
            assert fill_in(chordal, mcs_order(chordal)).fill_edges == frozenset()

    def test_trees_need_no_fill(self):
        for seed in range(10):
            case = generate_radial(12, seed, tree=True)
            d = decompose(build_cost_matrix(case))
            assert d.completion.fill_edges == frozenset()
            assert all(len(clique) == 2 for clique in d.cliques)

    def test_ordering_must_be_permutation(self):
        with pytest.raises(ValueError, match="permutation"):
            fill_in(ring5_graph(), (0, 1, 2, 3, 3))


class TestCliques:
    def test_ring5_decomposition(self):
        d = maximal_cliques(fill_in(ring5_graph(), mcs_order(ring5_graph())))
        assert d.completion.fill_edges == frozenset({(1, 2)})
        assert d.cliques == ((0, 1, 2), (1, 2, 3), (3, 4))
        assert d.shared_entries == [(1, 1), (1, 2), (2, 2), (3, 3)]
        assert d.omega[(3, 3)] == (1, 2)
        assert d.is_fill(2, 1)

    def test_term_classification(self):
        d = maximal_cliques(fill_in(ring5_graph(), mcs_order(ring5_graph())))
        assert d.term(0, 4).kind is TermKind.IGNORED
        assert d.term(4, 3) == d.term(3, 4)
        assert d.term(3, 4).kind is TermKind.UNIQUE and d.term(3, 4).clique == 2
        assert d.term(2, 1).kind is TermKind.SHARED
        assert d.term(0, 0).clique == 0

    def test_cliques_are_maximal(self):
        for seed in range(10):
            g = random_graph(10, 0.35, seed)
            d = maximal_cliques(fill_in(g, mcs_order(g)))
            adj = d.completion.graph.adjacency()
            for q in d.cliques:
                assert all(b in adj[a] for a in q for b in q if a != b)
                assert not any(all(v in adj[u] for u in q) for v in range(10) if v not in q)
            assert len(set(d.cliques)) == len(d.cliques)

    def test_every_pair_classified_consistently(self):
        for seed in range(10):
            g = random_graph(8, 0.3, seed)
            d = maximal_cliques(fill_in(g, mcs_order(g)))
            for (i, k), members in d.omega.items():
                assert members == tuple(l for l, q in enumerate(d.cliques) if i in q and k in q)
            for i in range(8):
                assert d.term(i, i).kind is not TermKind.IGNORED

    def test_single_clique(self):
        d = decompose(np.ones((4, 4)))
        assert d.cliques == ((0, 1, 2, 3),)
        assert d.shared_entries == []

    def test_star_cliques(self, star_case):
        case = star_case(5)
        d = decompose(build_cost_matrix(case))
        assert d.cliques == ((0, 4), (1, 4), (2, 4), (3, 4))
        assert d.shared_entries == [(4, 4)]
        assert d.omega[(4, 4)] == (0, 1, 2, 3)

    def test_deterministic(self):
        M = build_cost_matrix(generate_radial(15, 3, tree=True))
        assert decompose(M) == decompose(M)


class TestCoordinators:
    def test_ring5(self):
        d = decompose(np.ones((1, 1)))
        assert assign_coordinators(d).solvers == (0,)

        d = maximal_cliques(fill_in(ring5_graph(), mcs_order(ring5_graph())))
        coordination = assign_coordinators(d)
        assert coordination.coordinators == {(1, 1): 1, (1, 2): 1, (2, 2): 1, (3, 3): 3}
        assert coordination.solvers == (0, 2, 4)

    def test_coordinator_in_every_clique(self):
        for seed in range(10):
            g = random_graph(9, 0.35, seed)
            d = maximal_cliques(fill_in(g, mcs_order(g)))
            coordination = assign_coordinators(d)
            for pair, bus in coordination.coordinators.items():
                assert all(bus in d.cliques[l] for l in d.omega[pair])
            for l, bus in enumerate(coordination.solvers):
                assert bus in d.cliques[l]

    def test_star_hub_coordinates(self, star_case):
        d = decompose(build_cost_matrix(star_case(4)))
        coordination = assign_coordinators(d)
        assert coordination.coordinators == {(3, 3): 3}
        assert coordination.solvers == (0, 1, 2)


class TestDump:
    def test_one_based(self):
        d = maximal_cliques(fill_in(ring5_graph(), mcs_order(ring5_graph())))
        doc = decomposition_to_json(d, assign_coordinators(d))
        assert doc["order"] == [5, 4, 3, 2, 1]
        assert doc["fill_edges"] == [[2, 3]]
        assert doc["cliques"] == [[1, 2, 3], [2, 3, 4], [4, 5]]
        assert {"entry": [4, 4], "bus": 4} in doc["coordinators"]
        assert doc["solvers"] == [1, 3, 5]


def random_connected_graph(n, p, seed):
    """A random spanning tree plus independent extra edges"""
    rng = np.random.default_rng(seed)
    edges = {(int(rng.integers(v)), v) for v in range(1, n)}
    edges |= {(i, k) for i in range(n) for k in range(i + 1, n) if rng.random() < p}
    return SparsityGraph(n, frozenset(edges))


class TestProperties:
    def test_completions_of_connected_graphs_are_chordal(self):
        for seed in range(200):
            rng = np.random.default_rng(seed)
            g = random_connected_graph(int(rng.integers(2, 16)), float(rng.uniform(0.05, 0.5)), seed)
            c = fill_in(g, mcs_order(g))
            assert is_chordal(c.graph)
            assert is_perfect_elimination_ordering(c.graph, c.order)
            assert g.edges <= c.graph.edges
            assert c.graph.edges - g.edges == c.fill_edges
            cliques = maximal_cliques(c).cliques
            assert all(any(i in q and k in q for q in cliques) for i, k in g.edges)

    @pytest.mark.parametrize("n", range(2, 51))
    def test_tree_has_n_minus_one_edge_cliques(self, n):
        case = generate_radial(n, n, tree=True)
        d = decompose(build_cost_matrix(case))
        assert len(d.cliques) == n - 1
        assert all(len(clique) == 2 for clique in d.cliques)
        assert d.completion.fill_edges == frozenset()

    def test_ring5_fill_is_one_chord(self):
        for start in range(5):
            c = fill_in(ring5_graph(), mcs_order(ring5_graph(), start=start))
            assert len(c.fill_edges) == 1 and c.fill_edges <= {(1, 2), (0, 3)}
            cliques = maximal_cliques(c).cliques
            assert sorted(map(len, cliques)) == [2, 3, 3] and (3, 4) in cliques
