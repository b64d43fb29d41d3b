"""Voltage recovery and rank diagnostics for a solved relaxation."""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import networkx as nx
import numpy as np

from cliqueopf_core.chordal import CliqueDecomposition
from cliqueopf_core.netcase import PowerCase, build_admittance

logger = logging.getLogger(__name__)

TIGHT_RATIO = 1e-5
LOOSE_RATIO = 1e-2
ZERO_ENTRY = 1e-10


class RecoveryError(ValueError):
    """Raised when voltages cannot be read off W (undefined angle on a line)"""


@dataclass(frozen=True)
class RankDiagnostic:
    sigma1: float
    sigma2: float
    ratio: float

    def to_dict(self) -> dict:
        return {"sigma1": self.sigma1, "sigma2": self.sigma2, "ratio": self.ratio}


@dataclass
class VoltageSolution:
    """
    Attributes
    ----------
    magnitudes -- |V_i| in p.u.
    angles -- theta_i in radians, zero at the reference bus
    injections -- real power P_i in p.u.
    reference -- 0-based reference bus
    method -- "bfs" or "eigenvector"
    rank -- RankDiagnostic of the W the voltages came from
    warnings -- human readable notes (relaxation not tight, cycle inconsistency)
    """
    magnitudes: np.ndarray
    angles: np.ndarray
    injections: np.ndarray
    reference: int
    method: str
    rank: RankDiagnostic
    warnings: List[str] = field(default_factory=list)

    @property
    def phasors(self) -> np.ndarray:
        return self.magnitudes * np.exp(1j * self.angles)

    def outer(self) -> np.ndarray:
        v = self.phasors
        return np.outer(v, v.conj())

    def to_dict(self) -> dict:
        return {
            "reference_bus": self.reference + 1,
            "method": self.method,
            "buses": [{"id": i + 1, "v": float(m), "theta": float(a), "p": float(p)}
                      for i, (m, a, p) in enumerate(zip(self.magnitudes, self.angles, self.injections))],
            "rank": self.rank.to_dict(),
            "warnings": list(self.warnings),
        }


@dataclass
class AssembledW:
    W: np.ndarray
    completed: bool
    conflict: float
    flagged: bool


def rank_check(W: np.ndarray) -> RankDiagnostic:
    """Top two singular values of W and their ratio sigma2/sigma1"""
    s = np.linalg.svd(np.asarray(W), compute_uv=False)
    sigma1 = float(s[0]) if s.size else 0.0
    sigma2 = float(s[1]) if s.size > 1 else 0.0
    return RankDiagnostic(sigma1=sigma1, sigma2=sigma2, ratio=sigma2 / sigma1 if sigma1 > 0 else 0.0)


def power_injections(W: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """P_i = Re{(W Y^H)_ii}"""
    return np.real(np.sum(W * Y.conj(), axis=1))


def linear_cost(P: np.ndarray, c1: np.ndarray) -> float:
    return float(np.dot(c1, P))


def _wrap(angle):
    return (angle + np.pi) % (2 * np.pi) - np.pi


def default_reference(case: PowerCase) -> int:
    """Lowest-index bus with positive linear cost (a generator), else bus 1"""
    generators = np.flatnonzero(case.c1 > 0)
    return int(generators[0]) if generators.size else 0


def _angles_by_traversal(W: np.ndarray, graph: nx.Graph, reference: int, edge_names: Dict[Tuple[int, int], str]):
    angles = np.zeros(W.shape[0])
    for i, k in nx.bfs_edges(graph, reference):
        if abs(W[i, k]) < ZERO_ENTRY:
            name = edge_names.get((min(i, k), max(i, k)), f"{i + 1}-{k + 1}")
            raise RecoveryError(f"angle undefined on line {name}: |W[{i + 1},{k + 1}]| = {abs(W[i, k]):.3e}")
        angles[k] = angles[i] - np.angle(W[i, k])
    return angles


def recover_voltages(W: np.ndarray, case: PowerCase, reference: Optional[int] = None,
                     Y: Optional[np.ndarray] = None) -> VoltageSolution:
    """ Read bus voltages off a solved W.

        |V_i| = sqrt(W_ii). Angles come from arg(W_ik) = theta_i - theta_k propagated
        breadth-first over the lines from the reference bus. When the rank ratio lies in
        (1e-5, 1e-2] the angles come from the top eigenvector instead, with a
        relaxation-not-tight warning.

        Keyword arguments:
        W -- n x n Hermitian matrix (entries on lines and the diagonal are required)
        case -- the network
        reference -- 0-based reference bus, lowest-index generator by default
        Y -- admittance matrix, built from the case when omitted

        Returns:
        solution -- VoltageSolution
    """
    W = np.asarray(W, dtype=complex)
    reference = default_reference(case) if reference is None else reference
    Y = build_admittance(case) if Y is None else Y
    rank = rank_check(W)
    notes = []

    magnitudes = np.sqrt(np.clip(np.diag(W).real, 0.0, None))
    graph = case.line_graph()
    names = {(line.pair[0] - 1, line.pair[1] - 1): f"{idx} ({line.from_bus}-{line.to_bus})"
             for idx, line in enumerate(case.lines)}

    if TIGHT_RATIO < rank.ratio <= LOOSE_RATIO:
        notes.append(f"relaxation-not-tight: rank ratio {rank.ratio:.2e}, angles from the top eigenvector")
        _, vecs = np.linalg.eigh(W)
        top = vecs[:, -1]
        angles = _wrap(np.angle(top) - np.angle(top[reference]))
        method = "eigenvector"
    else:
        if rank.ratio > LOOSE_RATIO:
            notes.append(f"relaxation-not-tight: rank ratio {rank.ratio:.2e}, voltages do not solve the original problem")
        angles = _angles_by_traversal(W, graph, reference, names)
        method = "bfs"

    tree = set((min(i, k), max(i, k)) for i, k in nx.bfs_edges(graph, reference))
    for line in case.lines:
        i, k = line.from_bus - 1, line.to_bus - 1
        if (min(i, k), max(i, k)) in tree or abs(W[i, k]) < ZERO_ENTRY:
            continue
        mismatch = abs(_wrap(angles[i] - angles[k] - np.angle(W[i, k])))
        if mismatch > 1e-4:
            notes.append(f"cycle inconsistency {mismatch:.2e} rad on line {line.from_bus}-{line.to_bus}")

    for note in notes:
        logger.warning(f"[ ! ] {note}")

    return VoltageSolution(magnitudes=magnitudes, angles=angles, injections=power_injections(W, Y),
                           reference=reference, method=method, rank=rank, warnings=notes)


def _rank_one_completion(W: np.ndarray, d: CliqueDecomposition) -> bool:
    graph = nx.Graph()
    graph.add_nodes_from(range(d.n))
    for i, k in d.omega:
        if i != k and abs(W[i, k]) >= ZERO_ENTRY:
            graph.add_edge(i, k)
    if not nx.is_connected(graph):
        return False

    angles = np.zeros(d.n)
    for i, k in nx.bfs_edges(graph, 0):
        angles[k] = angles[i] - np.angle(W[i, k])
    v = np.sqrt(np.clip(np.diag(W).real, 0.0, None)) * np.exp(1j * angles)
    for i in range(d.n):
        for k in range(i + 1, d.n):
            if (i, k) not in d.omega:
                W[i, k] = v[i] * np.conj(v[k])
                W[k, i] = np.conj(W[i, k])
    return True


def assemble_W(d: CliqueDecomposition, blocks: Dict[int, np.ndarray],
               shared: Optional[Dict[Tuple[int, int], complex]] = None, complete: bool = True) -> AssembledW:
    """ Put per-clique blocks back into one n x n Hermitian matrix.

        Entries held by several blocks are averaged and the largest deviation of a copy
        from its average is reported as `conflict`. Values in `shared` (i <= k keys) win
        over block copies. Entries outside every clique are filled with the rank-1
        completion when every block has rank ratio <= 1e-5, otherwise left at zero.

        Keyword arguments:
        d -- the decomposition the blocks belong to
        blocks -- clique index -> local Hermitian block
        shared -- coordinator-held values of shared entries
        complete -- attempt the rank-1 completion

        Returns:
        assembled -- AssembledW
    """
    missing = [l for l in range(len(d.cliques)) if l not in blocks]
    if missing:
        raise ValueError(f"missing block(s) for clique(s) {[l + 1 for l in missing]}")

    total = np.zeros((d.n, d.n), dtype=complex)
    count = np.zeros((d.n, d.n))
    for l, clique in enumerate(d.cliques):
        idx = np.ix_(clique, clique)
        total[idx] += blocks[l]
        count[idx] += 1
    W = np.divide(total, count, out=np.zeros_like(total), where=count > 0)

    conflict = 0.0
    for l, clique in enumerate(d.cliques):
        conflict = max(conflict, float(np.max(np.abs(blocks[l] - W[np.ix_(clique, clique)]))))

    for (i, k), value in (shared or {}).items():
        W[i, k] = value
        W[k, i] = np.conj(value)
    W = 0.5 * (W + W.conj().T)

    flagged = conflict > 1e-6
    if flagged:
        logger.debug(f"[ Dbg ] assembled W from disagreeing copies, max deviation {conflict:.3e}")

    completed = False
    if complete:
        if len(d.cliques) == 1 or all(rank_check(blocks[l]).ratio <= TIGHT_RATIO for l in blocks):
            completed = _rank_one_completion(W, d) if len(d.cliques) > 1 else True
    return AssembledW(W=W, completed=completed, conflict=conflict, flagged=flagged)
