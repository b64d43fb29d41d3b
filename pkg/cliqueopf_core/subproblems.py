"""Plumbing shared by the primal and dual coordination algorithms."""
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Optional, Sequence

import numpy as np

from cliqueopf_core.chordal import CliqueDecomposition, decompose
from cliqueopf_core.hsdp import HermitianSdp, SdpSolution, SolverOptions, solve
from cliqueopf_core.netcase import PowerCase, build_admittance, build_cost_matrix


@dataclass(frozen=True)
class CliqueProblem:
    """
    Everything a coordination algorithm needs about the relaxation.

    Attributes
    ----------
    M -- n x n Hermitian cost matrix
    w_min, w_max -- diagonal bounds (squared voltage bounds)
    decomposition -- CliqueDecomposition of the sparsity pattern
    options -- SolverOptions for every clique solve
    """
    M: np.ndarray
    w_min: np.ndarray
    w_max: np.ndarray
    decomposition: CliqueDecomposition
    options: SolverOptions = SolverOptions()

    @classmethod
    def from_case(cls, case: PowerCase, costs: Optional[Sequence[float]] = None,
                  order: Optional[Sequence[int]] = None, options: Optional[SolverOptions] = None,
                  pattern: Optional[np.ndarray] = None) -> "CliqueProblem":
        """ Build the relaxation of a case.

            Keyword arguments:
            costs -- linear costs, the case's c1 by default
            order -- elimination ordering for the chordal completion
            pattern -- matrix whose sparsity drives the decomposition, M by default
        """
        Y = build_admittance(case)
        M = build_cost_matrix(case, costs, Y=Y)
        decomposition = decompose(M if pattern is None else pattern, order)
        return cls(M=M, w_min=case.w_min, w_max=case.w_max, decomposition=decomposition,
                   options=options or SolverOptions())

    def with_costs(self, M: np.ndarray) -> "CliqueProblem":
        """Same decomposition and bounds, different cost matrix"""
        return CliqueProblem(M=M, w_min=self.w_min, w_max=self.w_max, decomposition=self.decomposition,
                             options=self.options)

    def objective(self, W: np.ndarray) -> float:
        """Tr(M W), reading only entries that M touches"""
        return float(np.real(np.sum(self.M.T * W)))


@dataclass
class CliqueSolve:
    clique: int
    solution: SdpSolution
    seconds: float


def _timed_solve(task) -> CliqueSolve:
    clique, sdp, options = task
    start = time.thread_time()
    solution = solve(sdp, options=options)
    return CliqueSolve(clique=clique, solution=solution, seconds=time.thread_time() - start)


def solve_cliques(sdps: Dict[int, HermitianSdp], pool, options: SolverOptions) -> Dict[int, CliqueSolve]:
    """ Solve clique subproblems on a pool.

        Only SDP solver CPU time of the solving thread is measured. Results are keyed by
        clique and inserted in ascending clique order so that sequential and threaded
        pools yield identical downstream arithmetic.
    """
    order = sorted(sdps)
    results = pool.map(_timed_solve, [(l, sdps[l], options) for l in order])
    return {res.clique: res for res in sorted(results, key=lambda r: r.clique)}


def scatter_block(W: np.ndarray, clique: Iterable[int], block: np.ndarray):
    idx = list(clique)
    W[np.ix_(idx, idx)] = block


def min_block_eigenvalue(W: np.ndarray, d: CliqueDecomposition) -> float:
    return min(float(np.linalg.eigvalsh(W[np.ix_(q, q)])[0]) for q in d.cliques)


@dataclass
class IterationRecord:
    """One coordination round, as streamed into the run report"""
    iteration: int
    step: float
    objective: float
    residual: float
    solve_seconds: Dict[int, float]
    cumulative_seconds: float
    distributed_seconds: float
    statuses: Dict[int, str]
    backtracks: int = 0
    frozen: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        doc = {
            "iteration": self.iteration,
            "step": self.step,
            "objective": self.objective,
            "residual": self.residual,
            "solve_seconds": {str(l + 1): s for l, s in sorted(self.solve_seconds.items())},
            "cumulative_seconds": self.cumulative_seconds,
            "distributed_seconds": self.distributed_seconds,
            "statuses": {str(l + 1): s for l, s in sorted(self.statuses.items())},
            "backtracks": self.backtracks,
            "frozen": [[i + 1, k + 1] for i, k in self.frozen],
        }
        doc.update(self.extra)
        return doc


def timing_totals(rounds) -> tuple:
    """(per-clique seconds, cumulative, distributed) over a list of {clique: seconds} rounds"""
    per_clique: Dict[int, float] = {}
    cumulative = distributed = 0.0
    for round_times in rounds:
        if not round_times:
            continue
        for l, s in round_times.items():
            per_clique[l] = per_clique.get(l, 0.0) + s
        cumulative += sum(round_times.values())
        distributed += max(round_times.values())
    return per_clique, cumulative, distributed


def shared_in_clique(d: CliqueDecomposition, l: int) -> list:
    return [pair for pair in d.shared_entries if l in d.omega[pair]]


def exchange(network, coordination, d: CliqueDecomposition, cliques: Iterable[int], kind,
             payload_for: Callable, to_solvers: bool = True):
    """ Route one message per (coordinator, clique solver) pair for the shared entries of
        each clique, coordinator -> solver or back. A no-op without a network.
    """
    if network is None:
        return
    for l in sorted(cliques):
        solver = coordination.solvers[l]
        owned: Dict[int, list] = {}
        for pair in shared_in_clique(d, l):
            owned.setdefault(coordination.coordinators[pair], []).append(pair)
        for owner, entries in sorted(owned.items()):
            payload = {pair: payload_for(l, pair) for pair in entries}
            if to_solvers:
                network.send(kind, owner, solver, payload)
            else:
                network.send(kind, solver, owner, payload)
