"""Sparsity graph, chordal completion and maximal-clique decomposition.

All vertices are 0-based matrix indices. Ties are always broken by the lowest index so that
every output is a deterministic function of the input matrix.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

import networkx as nx
import numpy as np

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]

ZERO_TOL = 1e-12


def _pair(i: int, k: int) -> Pair:
    return (i, k) if i <= k else (k, i)


@dataclass(frozen=True)
class SparsityGraph:
    n: int
    edges: FrozenSet[Pair]

    def __post_init__(self):
        edges = frozenset(_pair(i, k) for i, k in self.edges)
        for i, k in edges:
            if i == k:
                raise ValueError(f"self-loop at vertex {i}")
            if not (0 <= i < self.n and 0 <= k < self.n):
                raise ValueError(f"edge {(i, k)} out of range for n={self.n}")
        object.__setattr__(self, "edges", edges)

    def adjacency(self) -> List[Set[int]]:
        adj = [set() for _ in range(self.n)]
        for i, k in self.edges:
            adj[i].add(k)
            adj[k].add(i)
        return adj

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n))
        graph.add_edges_from(sorted(self.edges))
        return graph


@dataclass(frozen=True)
class ChordalCompletion:
    base: SparsityGraph
    fill_edges: FrozenSet[Pair]
    order: Tuple[int, ...]

    @property
    def graph(self) -> SparsityGraph:
        return SparsityGraph(self.base.n, self.base.edges | self.fill_edges)


class TermKind(str, Enum):
    IGNORED = "ignored"
    UNIQUE = "unique"
    SHARED = "shared"


@dataclass(frozen=True)
class Term:
    kind: TermKind
    clique: Optional[int] = None


@dataclass(frozen=True)
class CliqueDecomposition:
    """
    Maximal cliques of a chordal completion plus the per-entry sharing sets.

    Attributes
    ----------
    completion -- the ChordalCompletion the cliques come from
    cliques -- tuple of sorted vertex tuples, ordered by (smallest member, size)
    omega -- (i, k) with i <= k -> sorted tuple of clique indices containing both

    Methods
    -------
    term(i, k):
        Ignored, Unique(l) or Shared classification, either index order
    """
    completion: ChordalCompletion
    cliques: Tuple[Tuple[int, ...], ...]
    omega: Dict[Pair, Tuple[int, ...]] = field(compare=False)

    @property
    def n(self) -> int:
        return self.completion.base.n

    def term(self, i: int, k: int) -> Term:
        members = self.omega.get(_pair(i, k), ())
        if not members:
            return Term(TermKind.IGNORED)
        if len(members) == 1:
            return Term(TermKind.UNIQUE, members[0])
        return Term(TermKind.SHARED)

    @property
    def classification(self) -> Dict[Pair, Term]:
        return {pair: self.term(*pair) for pair in self.omega}

    @property
    def shared_entries(self) -> List[Pair]:
        return sorted(pair for pair, members in self.omega.items() if len(members) >= 2)

    def is_fill(self, i: int, k: int) -> bool:
        return _pair(i, k) in self.completion.fill_edges

    def local_index(self, l: int) -> Dict[int, int]:
        """Map global vertex -> position inside clique l"""
        return {v: pos for pos, v in enumerate(self.cliques[l])}


@dataclass(frozen=True)
class Coordination:
    """Bus (0-based) that owns each shared entry, and the bus that solves each clique"""
    coordinators: Dict[Pair, int]
    solvers: Tuple[int, ...]


def build_graph(M: np.ndarray, tol: float = ZERO_TOL) -> SparsityGraph:
    """Edge (i, k) for every off-diagonal |M_ik| > tol"""
    M = np.asarray(M)
    n = M.shape[0]
    rows, cols = np.nonzero(np.abs(np.triu(M, 1)) > tol)
    return SparsityGraph(n, frozenset(zip(rows.tolist(), cols.tolist())))


def mcs_order(g: SparsityGraph, start: Optional[int] = None) -> Tuple[int, ...]:
    """ Maximum cardinality search, returned as an elimination ordering.

        Vertices are visited one at a time, always picking the unvisited vertex with the
        most visited neighbours (lowest index on ties). The elimination ordering is the
        reverse of the visit order, which is a perfect elimination ordering whenever g is
        chordal.

        Keyword arguments:
        g -- the graph
        start -- first vertex to visit, lowest index by default

        Returns:
        sigma -- tuple of vertices in elimination order
    """
    adj = g.adjacency()
    weight = [0] * g.n
    visited = [False] * g.n
    visit = []
    for step in range(g.n):
        if step == 0 and start is not None:
            v = start
        else:
            v = max((u for u in range(g.n) if not visited[u]), key=lambda u: (weight[u], -u))
        visited[v] = True
        visit.append(v)
        for u in adj[v]:
            if not visited[u]:
                weight[u] += 1
    return tuple(reversed(visit))


def _check_permutation(order: Sequence[int], n: int):
    if sorted(order) != list(range(n)):
        raise ValueError(f"elimination ordering must be a permutation of 0..{n - 1}, got {list(order)}")


def fill_in(g: SparsityGraph, order: Sequence[int]) -> ChordalCompletion:
    """Elimination game: eliminating v joins all of v's not-yet-eliminated neighbours"""
    _check_permutation(order, g.n)
    adj = g.adjacency()
    eliminated = [False] * g.n
    fill = set()
    for v in order:
        later = sorted(u for u in adj[v] if not eliminated[u])
        for a_pos, a in enumerate(later):
            for b in later[a_pos + 1:]:
                if b not in adj[a]:
                    adj[a].add(b)
                    adj[b].add(a)
                    fill.add(_pair(a, b))
        eliminated[v] = True
    if fill:
        logger.debug(f"[ Dbg ] fill-in added {len(fill)} edge(s): {sorted(fill)}")
    return ChordalCompletion(base=g, fill_edges=frozenset(fill), order=tuple(order))


def is_perfect_elimination_ordering(g: SparsityGraph, order: Sequence[int]) -> bool:
    """True when every vertex's later neighbours (w.r.t. order) are pairwise adjacent"""
    _check_permutation(order, g.n)
    adj = g.adjacency()
    position = {v: pos for pos, v in enumerate(order)}
    for v in order:
        later = [u for u in adj[v] if position[u] > position[v]]
        for a_pos, a in enumerate(later):
            for b in later[a_pos + 1:]:
                if b not in adj[a]:
                    return False
    return True


def is_chordal(g: SparsityGraph) -> bool:
    return is_perfect_elimination_ordering(g, mcs_order(g))


def maximal_cliques(c: ChordalCompletion) -> CliqueDecomposition:
    """ Enumerate maximal cliques of the completed graph (networkx Bron-Kerbosch with pivoting).

        Cliques are sorted by smallest member, then size, then lexicographically. omega
        lists, for every index pair covered by some clique (diagonals included), the
        cliques that contain it.

        Keyword arguments:
        c -- a chordal completion

        Returns:
        decomposition -- CliqueDecomposition
    """
    found = [tuple(sorted(q)) for q in nx.find_cliques(c.graph.to_networkx())]
    cliques = tuple(sorted(found, key=lambda q: (q[0], len(q), q)))

    omega: Dict[Pair, List[int]] = {}
    for l, clique in enumerate(cliques):
        for a_pos, a in enumerate(clique):
            for b in clique[a_pos:]:
                omega.setdefault((a, b), []).append(l)

    logger.debug(f"[ Dbg ] {len(cliques)} maximal clique(s), largest has {max(len(q) for q in cliques)} vertices")
    return CliqueDecomposition(completion=c, cliques=cliques,
                               omega={pair: tuple(members) for pair, members in sorted(omega.items())})


def assign_coordinators(d: CliqueDecomposition) -> Coordination:
    """ Pick the coordinating bus for every shared entry and the solving bus for every clique.

        A shared entry (i, k) is owned by the lowest-index bus common to all cliques in
        Omega_ik, which is a member of each of them. A clique is solved at its lowest-index
        member that coordinates nothing, falling back to its lowest-index member.

        Keyword arguments:
        d -- the clique decomposition

        Returns:
        coordination -- Coordination with 0-based bus indices
    """
    coordinators = {}
    for pair in d.shared_entries:
        common = set.intersection(*(set(d.cliques[l]) for l in d.omega[pair]))
        coordinators[pair] = min(common)

    owners = set(coordinators.values())
    solvers = []
    for clique in d.cliques:
        free = [v for v in clique if v not in owners]
        solvers.append(free[0] if free else clique[0])
    return Coordination(coordinators=coordinators, solvers=tuple(solvers))


def decompose(matrix: np.ndarray, order: Optional[Sequence[int]] = None) -> CliqueDecomposition:
    """Full pipeline: sparsity graph, MCS (or a given ordering), fill-in, maximal cliques"""
    graph = build_graph(matrix)
    sigma = mcs_order(graph) if order is None else tuple(order)
    return maximal_cliques(fill_in(graph, sigma))


def decomposition_to_json(d: CliqueDecomposition, coordination: Optional[Coordination] = None) -> dict:
    """Debug dump with 1-based bus ids"""
    doc = {
        "n": d.n,
        "order": [v + 1 for v in d.completion.order],
        "fill_edges": [[i + 1, k + 1] for i, k in sorted(d.completion.fill_edges)],
        "cliques": [[v + 1 for v in clique] for clique in d.cliques],
        "classification": [
            {"entry": [i + 1, k + 1], "kind": term.kind.value,
             "cliques": [l + 1 for l in d.omega[(i, k)]]}
            for (i, k), term in d.classification.items()
        ],
    }
    if coordination is not None:
        doc["coordinators"] = [{"entry": [i + 1, k + 1], "bus": bus + 1}
                               for (i, k), bus in sorted(coordination.coordinators.items())]
        doc["solvers"] = [bus + 1 for bus in coordination.solvers]
    return doc
