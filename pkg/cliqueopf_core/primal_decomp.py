"""Primal (resource allocation) coordination.

A coordinator fixes every shared entry of W. Each clique then solves its subproblem with
those entries pinned and reports the equality multipliers, which are the sensitivities of
its optimal value to the pinned values. Shared entries move by a projected subgradient
step on the master objective.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Set, Tuple

import numpy as np

from cliqueopf_core.chordal import CliqueDecomposition, TermKind
from cliqueopf_core.hsdp import DiagBox, Equality, HermitianSdp, SdpStatus
from cliqueopf_core.recover import assemble_W, rank_check
from cliqueopf_core.subproblems import (CliqueProblem, IterationRecord, exchange, shared_in_clique,
                                        solve_cliques, timing_totals)
from cliqueopf_utils.message_network import MessageKind

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]


class SubproblemError(RuntimeError):
    """A clique subproblem could not be constructed"""


@dataclass
class PrimalState:
    """
    Coordinator-side iterate.

    Attributes
    ----------
    shared -- (i, k), i <= k -> W_ik for every shared entry (real for i == k)
    step -- step size of the last master update
    iteration -- completed master updates
    multipliers -- (clique, entry) -> y (complex y_re + j*y_im off the diagonal)
    previous -- shared values before the last master update
    gradient -- subgradient used by the last master update
    entry_step -- step actually applied per entry (halved by backtracking)
    retries -- backtracks spent per entry in the current iteration
    frozen -- entries reverted after exhausting their retries, for this iteration
    blocks -- clique -> latest local solution
    solved_shared -- shared values the blocks were solved with
    """
    shared: Dict[Pair, complex]
    step: float
    iteration: int = 0
    multipliers: Dict[Tuple[int, Pair], complex] = field(default_factory=dict)
    previous: Dict[Pair, complex] = field(default_factory=dict)
    gradient: Dict[Pair, complex] = field(default_factory=dict)
    entry_step: Dict[Pair, float] = field(default_factory=dict)
    retries: Dict[Pair, int] = field(default_factory=dict)
    frozen: Set[Pair] = field(default_factory=set)
    blocks: Dict[int, np.ndarray] = field(default_factory=dict)
    solved_shared: Dict[Pair, complex] = field(default_factory=dict)


def initial_state(problem: CliqueProblem, step: float = 1.0) -> PrimalState:
    """Shared diagonals at the middle of their boxes, shared edges at zero"""
    shared = {}
    for i, k in problem.decomposition.shared_entries:
        shared[(i, k)] = 0.5 * (problem.w_min[i] + problem.w_max[i]) if i == k else 0j
    return PrimalState(shared=shared, step=step)


@dataclass(frozen=True)
class PrimalSubproblem:
    """
    Attributes
    ----------
    clique -- clique index l
    members -- global indices of the clique, in local order
    objective -- local objective, unique terms only
    pinned -- local (a, b), a <= b -> pinned value
    boxes -- DiagBox per unique diagonal
    """
    clique: int
    members: Tuple[int, ...]
    objective: np.ndarray
    pinned: Dict[Pair, complex]
    boxes: Tuple[DiagBox, ...]

    def rows(self) -> List[Tuple[Pair, str]]:
        """(local entry, part) per equality, in the order of to_sdp()"""
        out = []
        for a, b in sorted(self.pinned):
            out.extend([((a, b), "diag")] if a == b else [((a, b), "re"), ((a, b), "im")])
        return out

    def to_sdp(self) -> HermitianSdp:
        m = len(self.members)
        equalities = []
        for (a, b), part in self.rows():
            value = self.pinned[(a, b)]
            E = np.zeros((m, m), dtype=complex)
            if part == "diag":
                E[a, a] = 1.0
                equalities.append(Equality(E, float(np.real(value))))
            elif part == "re":
                E[a, b] = E[b, a] = 0.5
                equalities.append(Equality(E, float(np.real(value))))
            else:
                E[a, b], E[b, a] = 0.5j, -0.5j
                equalities.append(Equality(E, float(np.imag(value))))
        return HermitianSdp(objective=self.objective, equalities=equalities, diag_boxes=list(self.boxes))

    def pins_consistent(self, tol: float = 1e-12) -> bool:
        """Necessary PSD conditions on the pinned values alone"""
        diag = {a: float(np.real(v)) for (a, b), v in self.pinned.items() if a == b}
        if any(v < -tol for v in diag.values()):
            return False
        for (a, b), v in self.pinned.items():
            if a != b and a in diag and b in diag and abs(v) ** 2 > diag[a] * diag[b] + tol:
                return False
        idx = sorted(diag)
        if len(idx) > 1 and all((a, b) in self.pinned for p, a in enumerate(idx) for b in idx[p + 1:]):
            block = np.zeros((len(idx), len(idx)), dtype=complex)
            for p, a in enumerate(idx):
                for q, b in enumerate(idx[p:], start=p):
                    block[p, q] = self.pinned[(a, b)]
                    block[q, p] = np.conj(block[p, q])
            return bool(np.linalg.eigvalsh(block)[0] >= -tol * max(1.0, max(diag.values())))
        return True


def build_subproblem(d: CliqueDecomposition, M: np.ndarray, w_min: np.ndarray, w_max: np.ndarray,
                     state: PrimalState, l: int) -> PrimalSubproblem:
    """ Subproblem of clique l: unique terms in the objective, shared entries pinned to the
        coordinator's values, unique diagonals boxed.

        Raises SubproblemError when a shared value is missing from the state.
    """
    members = d.cliques[l]
    m = len(members)
    objective = np.zeros((m, m), dtype=complex)
    pinned, boxes = {}, []
    for a, i in enumerate(members):
        for b in range(a, m):
            k = members[b]
            term = d.term(i, k)
            if term.kind == TermKind.SHARED:
                if (i, k) not in state.shared:
                    raise SubproblemError(f"clique {l + 1}: no value for shared entry ({i + 1},{k + 1})")
                pinned[(a, b)] = state.shared[(i, k)]
            else:
                objective[a, b] = M[i, k]
                objective[b, a] = M[k, i]
                if a == b:
                    boxes.append(DiagBox(a, float(w_min[i]), float(w_max[i])))
    return PrimalSubproblem(clique=l, members=members, objective=objective, pinned=pinned, boxes=tuple(boxes))


def collect_multipliers(sub: PrimalSubproblem, eq_multipliers: np.ndarray) -> Dict[Tuple[int, Pair], complex]:
    """Map a subproblem's equality multipliers back to (clique, global entry)"""
    out: Dict[Tuple[int, Pair], complex] = {}
    for ((a, b), part), y in zip(sub.rows(), eq_multipliers):
        key = (sub.clique, (sub.members[a], sub.members[b]))
        if part == "im":
            out[key] = out.get(key, 0j) + 1j * y
        else:
            out[key] = out.get(key, 0j) + y
    return out


def project(value: float, lower: float, upper: float) -> float:
    return float(min(max(value, lower), upper))


def master_update(state: PrimalState, multipliers: Dict[Tuple[int, Pair], complex], M: np.ndarray,
                  w_min: np.ndarray, w_max: np.ndarray, d: CliqueDecomposition) -> PrimalState:
    """ One synchronous projected subgradient step on every shared entry.

        Diagonal:  W_ii <- Proj(W_ii - step * (sum_l y_ii,l + M_ii))
        Edge:      W_ik <- W_ik - step * (sum_l (y_re + j y_im) + 2 M_ik)
        Fill edge: W_ik <- W_ik - step * sum_l (y_re + j y_im)

        All gradients are taken at the pre-update values.

        Keyword arguments:
        state -- current PrimalState; its step is used
        multipliers -- (clique, entry) -> y for every clique of every shared entry
        M -- cost matrix
        w_min, w_max -- diagonal bounds
        d -- the decomposition

        Returns:
        state -- a new PrimalState
    """
    shared, gradient = dict(state.shared), {}
    for pair in d.shared_entries:
        i, k = pair
        missing = [l for l in d.omega[pair] if (l, pair) not in multipliers]
        if missing:
            raise SubproblemError(f"no multiplier for ({i + 1},{k + 1}) from clique(s) {[l + 1 for l in missing]}")
        total = sum(multipliers[(l, pair)] for l in d.omega[pair])
        if i == k:
            g = float(np.real(total)) + float(np.real(M[i, i]))
            shared[pair] = project(state.shared[pair] - state.step * g, w_min[i], w_max[i])
        else:
            g = complex(total) + (0j if d.is_fill(i, k) else 2.0 * complex(M[i, k]))
            shared[pair] = complex(state.shared[pair] - state.step * g)
        gradient[pair] = g
    return replace(state, shared=shared, iteration=state.iteration + 1, multipliers=dict(multipliers),
                   previous=dict(state.shared), gradient=gradient,
                   entry_step={pair: state.step for pair in gradient}, retries={}, frozen=set())


def backtrack(state: PrimalState, entries, w_min: np.ndarray, w_max: np.ndarray,
              max_backtracks: int = 10) -> Tuple[PrimalState, List[Pair]]:
    """ Step back on entries whose last update made a subproblem infeasible.

        Each retry re-applies the entry's update from its previous value with half the step.
        Once an entry has failed max_backtracks retries it is restored to its previous value
        and frozen for the rest of the iteration.

        Returns:
        (state, newly frozen entries)
    """
    shared = dict(state.shared)
    entry_step, retries, frozen = dict(state.entry_step), dict(state.retries), set(state.frozen)
    newly_frozen = []
    for pair in entries:
        if pair in frozen or pair not in state.previous:
            continue
        retries[pair] = retries.get(pair, 0) + 1
        if retries[pair] > max_backtracks:
            shared[pair] = state.previous[pair]
            frozen.add(pair)
            newly_frozen.append(pair)
            logger.warning(f"[ ! ] entry ({pair[0] + 1},{pair[1] + 1}) still infeasible after "
                           f"{max_backtracks} step halvings; frozen for this iteration")
            continue
        entry_step[pair] = entry_step.get(pair, state.step) / 2.0
        i, k = pair
        proposal = state.previous[pair] - entry_step[pair] * state.gradient[pair]
        shared[pair] = project(np.real(proposal), w_min[i], w_max[i]) if i == k else complex(proposal)
    return replace(state, shared=shared, entry_step=entry_step, retries=retries, frozen=frozen), newly_frozen


def _shared_terms(problem: CliqueProblem, shared: Dict[Pair, complex]) -> float:
    total = 0.0
    for (i, k), value in shared.items():
        if i == k:
            total += float(np.real(problem.M[i, i])) * float(np.real(value))
        else:
            total += 2.0 * float(np.real(np.conj(problem.M[i, k]) * value))
    return total


def primal_iterate(problem: CliqueProblem, state: PrimalState, pool, step: float,
                   max_backtracks: int = 10, network=None, coordination=None) -> Tuple[PrimalState, IterationRecord]:
    """ One round of the primal algorithm: solve every clique with the shared entries
        pinned (stepping back on infeasibility), then apply the master update.

        Keyword arguments:
        problem -- CliqueProblem
        state -- PrimalState from the previous round
        pool -- SequentialPool or ThreadedPool for the clique solves
        step -- step size for this round's master update
        max_backtracks -- step halvings per entry before it is frozen
        network, coordination -- SimulatedNetwork and Coordination in distributed runs

        Returns:
        (state, record) -- the updated state and the IterationRecord of this round. The
            record's objective is the master objective: the subproblem optima plus the
            shared terms at the pinned values. extra holds Tr(M W) of the completed W and
            its rank ratio.
    """
    d = problem.decomposition
    pending = list(range(len(d.cliques)))
    subs: Dict[int, PrimalSubproblem] = {}
    results = {}
    rounds = []
    backtracks = 0
    frozen: List[Pair] = []
    failed: List[int] = []

    while pending:
        for l in pending:
            subs[l] = build_subproblem(d, problem.M, problem.w_min, problem.w_max, state, l)
        exchange(network, coordination, d, pending, MessageKind.ALLOCATION,
                 lambda l, pair: state.shared[pair])

        rejected = [l for l in pending if not subs[l].pins_consistent()]
        solved = solve_cliques({l: subs[l].to_sdp() for l in pending if l not in rejected}, pool, problem.options)
        rounds.append({l: res.seconds for l, res in solved.items()})
        results.update(solved)

        failed = sorted(rejected + [l for l, res in solved.items() if res.solution.status == SdpStatus.INFEASIBLE])
        if not failed:
            break

        changed = sorted({pair for l in failed for pair in shared_in_clique(d, l)
                          if pair in state.previous and pair not in state.frozen
                          and state.shared[pair] != state.previous[pair]})
        if not changed:
            logger.error(f"[ ! ] clique(s) {[l + 1 for l in failed]} infeasible with nothing left to step back")
            break
        state, newly_frozen = backtrack(state, changed, problem.w_min, problem.w_max, max_backtracks)
        frozen.extend(newly_frozen)
        backtracks += 1
        pending = sorted({l for pair in changed for l in d.omega[pair]})

    multipliers = {}
    blocks = dict(state.blocks)
    statuses = {}
    for l, res in sorted(results.items()):
        statuses[l] = res.solution.status.value
        if res.solution.status in (SdpStatus.OPTIMAL, SdpStatus.MAX_ITER):
            blocks[l] = res.solution.X
            multipliers.update(collect_multipliers(subs[l], res.solution.eq_multipliers))
    for l in failed:
        statuses[l] = SdpStatus.INFEASIBLE.value
    exchange(network, coordination, d, results.keys(), MessageKind.MULTIPLIER,
             lambda l, pair: multipliers.get((l, pair)), to_solvers=False)

    solved_shared = dict(state.shared)
    objective = float("nan")
    extra = {"assembled_objective": float("nan"), "rank_ratio": float("nan"), "objective_kind": "master"}
    if len(blocks) == len(d.cliques) and len(results) == len(d.cliques) and not failed:
        objective = sum(res.solution.objective_value for res in results.values()) + \
            _shared_terms(problem, solved_shared)
        assembled = assemble_W(d, blocks, solved_shared)
        extra.update(assembled_objective=problem.objective(assembled.W), rank_ratio=rank_check(assembled.W).ratio)

    if failed:
        new_state = replace(state, step=step)
    else:
        new_state = master_update(replace(state, step=step), multipliers, problem.M, problem.w_min,
                                  problem.w_max, d)
    new_state.blocks = blocks
    new_state.solved_shared = solved_shared
    new_state.iteration = state.iteration + 1
    residual = max((abs(new_state.shared[p] - state.shared[p]) for p in state.shared), default=0.0)

    per_clique, cumulative, distributed = timing_totals(rounds)
    record = IterationRecord(iteration=new_state.iteration, step=step, objective=float(objective),
                             residual=float(residual), solve_seconds=per_clique, cumulative_seconds=cumulative,
                             distributed_seconds=distributed, statuses=statuses, backtracks=backtracks,
                             frozen=frozen, extra=extra)
    return new_state, record
