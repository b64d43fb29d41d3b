"""Dual (price consensus) coordination.

Every clique keeps a private slack copy X_ik,l of each shared entry. The copies of one
entry are tied by |Omega_ik| - 1 pairwise equalities, each with its own price. A clique's
subproblem sees its share M_ik / |Omega_ik| of the cost plus the aggregate of the prices
touching its copy. Prices move toward consensus by a subgradient step.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from cliqueopf_core import primal_decomp
from cliqueopf_core.chordal import CliqueDecomposition, TermKind
from cliqueopf_core.hsdp import DiagBox, HermitianSdp, SdpStatus
from cliqueopf_core.recover import assemble_W, rank_check
from cliqueopf_core.subproblems import (CliqueProblem, CliqueSolve, IterationRecord, exchange, min_block_eigenvalue,
                                        shared_in_clique, solve_cliques, timing_totals)
from cliqueopf_utils.message_network import MessageKind

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]


class ChainScheme(str, Enum):
    CHAIN = "chain"
    STAR = "star"
    RANDOM = "random"


@dataclass(frozen=True)
class EqualityChain:
    """
    Attributes
    ----------
    entry -- shared entry (i, k), i <= k
    cliques -- Omega_ik, sorted
    equalities -- (left, right) clique pairs; X_left = X_right
    prices -- one price per equality (real valued for diagonal entries)
    """
    entry: Pair
    cliques: Tuple[int, ...]
    equalities: Tuple[Tuple[int, int], ...]
    prices: Tuple[complex, ...]

    def aggregate(self) -> Dict[int, complex]:
        """Left clique of an equality gets +price, right clique -price; the sum telescopes to 0"""
        out = {l: 0j for l in self.cliques}
        for (left, right), price in zip(self.equalities, self.prices):
            out[left] += price
            out[right] -= price
        return out


def build_chains(d: CliqueDecomposition, scheme: ChainScheme = ChainScheme.CHAIN,
                 seed: int = 0) -> Dict[Pair, EqualityChain]:
    """ Arrange the consensus equalities of every shared entry, prices at zero.

        Chain links consecutive cliques of the sorted Omega_ik, Star links the first clique
        to every other, Random draws a seeded random spanning tree.
    """
    scheme = ChainScheme(scheme)
    rng = np.random.default_rng(seed)
    chains = {}
    for pair in d.shared_entries:
        members = d.omega[pair]
        if scheme == ChainScheme.CHAIN:
            equalities = tuple(zip(members[:-1], members[1:]))
        elif scheme == ChainScheme.STAR:
            equalities = tuple((members[0], l) for l in members[1:])
        else:
            perm = [members[p] for p in rng.permutation(len(members))]
            equalities = tuple((perm[int(rng.integers(j))], perm[j]) for j in range(1, len(perm)))
        chains[pair] = EqualityChain(entry=pair, cliques=tuple(members), equalities=equalities,
                                     prices=tuple(0j for _ in equalities))
    return chains


def aggregate_prices(chains: Dict[Pair, EqualityChain]) -> Dict[Tuple[int, Pair], complex]:
    out = {}
    for pair, chain in chains.items():
        for l, value in chain.aggregate().items():
            out[(l, pair)] = value
    return out


def build_dual_subproblem(d: CliqueDecomposition, M: np.ndarray, w_min: np.ndarray, w_max: np.ndarray,
                          prices: Dict[Tuple[int, Pair], complex], l: int) -> HermitianSdp:
    """ Price-shifted subproblem of clique l.

        Unique terms carry their full M_ik, shared terms M_ik / |Omega_ik| plus the clique's
        aggregate price (conjugated at (k, i)). Every diagonal is boxed; there are no
        equality constraints.
    """
    members = d.cliques[l]
    m = len(members)
    objective = np.zeros((m, m), dtype=complex)
    boxes = []
    for a, i in enumerate(members):
        boxes.append(DiagBox(a, float(w_min[i]), float(w_max[i])))
        for b in range(a, m):
            k = members[b]
            term = d.term(i, k)
            if term.kind == TermKind.SHARED:
                q = M[i, k] / len(d.omega[(i, k)]) + prices.get((l, (i, k)), 0j)
            else:
                q = M[i, k]
            if a == b:
                objective[a, a] = np.real(q)
            else:
                objective[a, b] = q
                objective[b, a] = np.conj(q)
    return HermitianSdp(objective=objective, diag_boxes=boxes)


def price_update(chain: EqualityChain, r: int, x_left: complex, x_right: complex, alpha: float) -> complex:
    """New price of equality r: price - alpha * (X_right - X_left)"""
    value = chain.prices[r] - alpha * (x_right - x_left)
    i, k = chain.entry
    return complex(np.real(value)) if i == k else complex(value)


STALL_ROUNDS = 5


@dataclass
class DualState:
    """
    Attributes
    ----------
    chains -- entry -> EqualityChain holding the current prices
    step -- step size applied in the last round
    iteration -- completed rounds
    slacks -- (clique, entry) -> latest slack copy
    blocks -- clique -> latest local solution
    values -- clique -> latest subproblem optimum
    counters -- (entry, r) -> price updates applied to equality r
    stamps -- clique -> round its latest solution was launched in
    repriced -- clique -> last round a price touching the clique changed
    pending -- (launch round, arrival round, clique, CliqueSolve) still in flight (asynchronous mode)
    cursor -- round-robin position of the next active subset
    relaxation -- scale of the target-level step, halved after STALL_ROUNDS rounds without
        a better lower bound
    best_lower -- best lower bound seen by the target-level step
    stalled -- rounds since best_lower last improved
    recovered -- latest feasible point, None until every clique has reported
    """
    chains: Dict[Pair, EqualityChain]
    step: float
    iteration: int = 0
    slacks: Dict[Tuple[int, Pair], complex] = field(default_factory=dict)
    blocks: Dict[int, np.ndarray] = field(default_factory=dict)
    values: Dict[int, float] = field(default_factory=dict)
    counters: Dict[Tuple[Pair, int], int] = field(default_factory=dict)
    stamps: Dict[int, int] = field(default_factory=dict)
    repriced: Dict[int, int] = field(default_factory=dict)
    pending: List[tuple] = field(default_factory=list)
    cursor: int = 0
    relaxation: float = 1.0
    best_lower: float = float("-inf")
    stalled: int = 0
    recovered: Optional["FeasiblePoint"] = None


def initial_state(problem: CliqueProblem, scheme: ChainScheme = ChainScheme.CHAIN, seed: int = 0,
                  step: float = 1.0) -> DualState:
    return DualState(chains=build_chains(problem.decomposition, scheme, seed), step=step, relaxation=step)


def restart(state: DualState, step: float) -> DualState:
    """ Keep the prices of a finished run for a new cost matrix.

        Every clique solution in hand was computed for the old costs, so none of them may
        drive a price update until its clique has solved again.
    """
    new = _copy_state(state)
    new.pending = []
    new.repriced = {l: state.iteration for l in state.stamps}
    new.relaxation, new.best_lower, new.stalled, new.recovered = step, float("-inf"), 0, None
    return new


@dataclass
class FeasiblePoint:
    """
    Attributes
    ----------
    W -- Hermitian matrix whose clique blocks are PSD with diagonals in their boxes
    min_eigenvalue -- smallest eigenvalue over the clique blocks
    repaired -- averaging needed a PSD repair
    gammas -- clique (-1 for the global fallback) -> off-diagonal scale of the repair
    objective -- Tr(M W), nan until evaluated
    polished -- W comes from re-solving the cliques at the averaged shared values
    seconds -- solver time of the re-solves
    """
    W: np.ndarray
    min_eigenvalue: float
    repaired: bool
    gammas: Dict[int, float]
    objective: float = float("nan")
    polished: bool = False
    seconds: float = 0.0


def _scaled(block: np.ndarray, mask: np.ndarray, gamma: float) -> np.ndarray:
    return np.where(mask, gamma * block, block)


def _largest_psd_scale(block: np.ndarray, mask: np.ndarray, iterations: int = 60) -> Optional[float]:
    """Largest gamma in [0, 1] keeping the block PSD with masked entries scaled by gamma"""
    if np.linalg.eigvalsh(_scaled(block, mask, 0.0))[0] < 0:
        return None
    lo, hi = 0.0, 1.0
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if np.linalg.eigvalsh(_scaled(block, mask, mid))[0] >= 0:
            lo = mid
        else:
            hi = mid
    return lo


def average_feasible(state: DualState, d: CliqueDecomposition, w_min: np.ndarray, w_max: np.ndarray,
                     drift_tol: float = 1e-9, psd_tol: float = 1e-10) -> FeasiblePoint:
    """ Feasible W from the latest clique solutions.

        Shared entries are the mean of their slack copies, unique entries come from their
        clique. Diagonals are clipped to their boxes; a drift beyond drift_tol (relative to
        max(1, w_max)) raises ValueError. A clique block that is not PSD gets its unique
        off-diagonals scaled by the largest gamma in [0, 1] that restores PSD; if shared
        entries alone break PSD, all off-diagonals of W are scaled together instead.

        Returns:
        point -- FeasiblePoint with the repaired W and its smallest clique-block eigenvalue
    """
    missing = [(l + 1, pair) for pair in d.shared_entries for l in d.omega[pair] if (l, pair) not in state.slacks]
    if missing:
        raise ValueError(f"missing slack value(s) for (clique, entry): {missing}")
    W = assemble_W(d, state.blocks, complete=False).W

    diag = np.diag(W).real
    drift = np.maximum(w_min - diag, 0.0) + np.maximum(diag - w_max, 0.0)
    if np.any(drift > drift_tol * np.maximum(1.0, w_max)):
        worst = int(np.argmax(drift))
        raise ValueError(f"averaged W[{worst + 1},{worst + 1}] = {diag[worst]} drifts outside "
                         f"[{w_min[worst]}, {w_max[worst]}]")
    np.fill_diagonal(W, np.clip(diag, w_min, w_max))

    gammas, repaired, fallback = {}, False, False
    for l, clique in enumerate(d.cliques):
        idx = np.ix_(clique, clique)
        block = W[idx]
        if np.linalg.eigvalsh(block)[0] >= -psd_tol:
            continue
        mask = np.array([[a != b and d.term(i, k).kind == TermKind.UNIQUE for b, k in enumerate(clique)]
                         for a, i in enumerate(clique)])
        gamma = _largest_psd_scale(block, mask)
        repaired = True
        if gamma is None:
            fallback = True
            continue
        gammas[l] = gamma
        W[idx] = _scaled(block, mask, gamma)

    if fallback:
        covered = np.zeros(W.shape, dtype=bool)
        for clique in d.cliques:
            covered[np.ix_(clique, clique)] = True
        off = covered & ~np.eye(W.shape[0], dtype=bool)
        lo, hi = 0.0, 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            trial = _scaled(W, off, mid)
            if all(np.linalg.eigvalsh(trial[np.ix_(q, q)])[0] >= 0 for q in d.cliques):
                lo = mid
            else:
                hi = mid
        W = _scaled(W, off, lo)
        gammas[-1] = lo
        logger.debug(f"[ Dbg ] averaged point needed a global off-diagonal scale {lo:.4f}")

    return FeasiblePoint(W=W, min_eigenvalue=min_block_eigenvalue(W, d), repaired=repaired, gammas=gammas)


def polish(problem: CliqueProblem, point: FeasiblePoint, pool) -> FeasiblePoint:
    """ Re-solve every clique with its shared entries pinned to their values in `point`.

        The pinned values are principal parts of PSD clique blocks, so every re-solve is
        feasible and never worse than the averaged block. The re-solved blocks are put back
        together with the rank-one completion. `point` is returned, with its objective
        filled in, when a re-solve fails or does not improve on it.

        Keyword arguments:
        problem -- CliqueProblem
        point -- output of average_feasible
        pool -- SequentialPool or ThreadedPool for the clique solves

        Returns:
        point -- FeasiblePoint
    """
    d = problem.decomposition
    averaged = replace(point, objective=problem.objective(point.W))
    pins = {(i, k): float(point.W[i, i].real) if i == k else complex(point.W[i, k]) for i, k in d.shared_entries}
    pinned = primal_decomp.PrimalState(shared=pins, step=0.0)
    subs = {l: primal_decomp.build_subproblem(d, problem.M, problem.w_min, problem.w_max, pinned, l)
            for l in range(len(d.cliques))}
    if not all(sub.pins_consistent(tol=1e-9) for sub in subs.values()):
        logger.debug("[ Dbg ] averaged shared values fail the pinned PSD test; skipping the re-solve")
        return averaged

    solved = solve_cliques({l: sub.to_sdp() for l, sub in subs.items()}, pool, problem.options)
    seconds = sum(res.seconds for res in solved.values())
    bad = [l + 1 for l, res in solved.items() if res.solution.status not in (SdpStatus.OPTIMAL, SdpStatus.MAX_ITER)]
    if bad:
        logger.debug(f"[ Dbg ] pinned re-solve failed on clique(s) {bad}")
        return replace(averaged, seconds=seconds)

    W = assemble_W(d, {l: res.solution.X for l, res in solved.items()}, pins).W
    objective = problem.objective(W)
    if objective > averaged.objective + problem.options.tol * max(1.0, abs(averaged.objective)):
        return replace(averaged, seconds=seconds)
    return FeasiblePoint(W=W, min_eigenvalue=min_block_eigenvalue(W, d), repaired=point.repaired,
                         gammas=point.gammas, objective=objective, polished=True, seconds=seconds)


def _snap_diagonal(X: np.ndarray, members, w_min: np.ndarray, w_max: np.ndarray, tol: float) -> np.ndarray:
    """Put diagonals lying outside their box by at most tol * max(1, upper) back on the box"""
    X = np.array(X, dtype=complex, copy=True)
    for a, i in enumerate(members):
        x, slack = float(X[a, a].real), tol * max(1.0, float(w_max[i]))
        if w_min[i] - slack <= x < w_min[i]:
            X[a, a] = w_min[i]
        elif w_max[i] < x <= w_max[i] + slack:
            X[a, a] = w_max[i]
    return X


def _absorb(state: DualState, problem: CliqueProblem, arrived: Dict[int, Tuple[int, CliqueSolve]]):
    d = problem.decomposition
    for l, (launched, res) in sorted(arrived.items()):
        if res.solution.status not in (SdpStatus.OPTIMAL, SdpStatus.MAX_ITER):
            logger.warning(f"[ ! ] clique {l + 1} subproblem ended {res.solution.status.value}; keeping its last copy")
            continue
        X = _snap_diagonal(res.solution.X, d.cliques[l], problem.w_min, problem.w_max, problem.options.tol)
        local = d.local_index(l)
        state.blocks[l] = X
        state.values[l] = res.solution.objective_value
        state.stamps[l] = launched
        for pair in shared_in_clique(d, l):
            state.slacks[(l, pair)] = complex(X[local[pair[0]], local[pair[1]]])


def _update_equality(state: DualState, pair: Pair, r: int, alpha: float) -> float:
    chain = state.chains[pair]
    left, right = chain.equalities[r]
    x_left, x_right = state.slacks[(left, pair)], state.slacks[(right, pair)]
    prices = list(chain.prices)
    prices[r] = price_update(chain, r, x_left, x_right, alpha)
    state.chains[pair] = replace(chain, prices=tuple(prices))
    state.counters[(pair, r)] = state.counters.get((pair, r), 0) + 1
    return abs(x_right - x_left)


def disagreement(state: DualState) -> float:
    """ Squared length of the consensus subgradient, sum over equalities of w |X_right - X_left|^2
        with w = 1 on diagonal entries and 2 on off-diagonal ones (both parts of a complex
        price enter the subproblem twice).
    """
    total = 0.0
    for pair, chain in state.chains.items():
        weight = 1.0 if pair[0] == pair[1] else 2.0
        for left, right in chain.equalities:
            if (left, pair) in state.slacks and (right, pair) in state.slacks:
                total += weight * abs(state.slacks[(right, pair)] - state.slacks[(left, pair)]) ** 2
    return total


def target_level_step(relaxation: float, upper: float, lower: float, squared_norm: float) -> float:
    """ relaxation * (upper - lower) / squared_norm: the step that would close the gap between
        the recovered objective and the dual bound along the current subgradient.
        Zero when the copies agree or either bound is unknown.
    """
    if not squared_norm > 0 or not (np.isfinite(upper) and np.isfinite(lower)):
        return 0.0
    return relaxation * max(upper - lower, 0.0) / squared_norm


def _track_lower_bound(state: DualState, lower: float):
    if lower > state.best_lower + 1e-9 * max(1.0, abs(lower)):
        state.best_lower, state.stalled = lower, 0
        return
    state.stalled += 1
    if state.stalled >= STALL_ROUNDS:
        state.relaxation /= 2.0
        state.stalled = 0
        logger.debug(f"[ Dbg ] lower bound stalled for {STALL_ROUNDS} rounds; relaxation now {state.relaxation:.4g}")


def _copy_state(state: DualState) -> DualState:
    return replace(state, chains=dict(state.chains), slacks=dict(state.slacks), blocks=dict(state.blocks),
                   values=dict(state.values), counters=dict(state.counters), stamps=dict(state.stamps),
                   repriced=dict(state.repriced), pending=list(state.pending))


def dual_iterate(problem: CliqueProblem, state: DualState, pool, step: float, async_mode: bool = False,
                 delays: Optional[Dict[int, int]] = None, schedule: Optional[Callable[[int], float]] = None,
                 network=None, coordination=None, target_level: bool = False) -> Tuple[DualState, IterationRecord]:
    """ One round of the dual algorithm.

        Synchronous: every clique solves with the current prices, then every equality is
        updated. Asynchronous: a round-robin subset of ceil(|C|/2) idle cliques launches and
        clique l's result lands `delays[l]` rounds later. In both variants an equality only
        moves when both of its copies were solved after the last price change touching
        either clique, so no price is pushed twice on the same data.

        Once every clique has reported, the averaged point is repaired, re-solved with its
        shared values pinned (see polish) and its objective becomes the round's objective;
        the sum of the subproblem optima is the round's lower bound.

        Keyword arguments:
        problem -- CliqueProblem
        state -- DualState from the previous round (left untouched)
        pool -- SequentialPool or ThreadedPool for the clique solves
        step -- step of synchronous rounds under a schedule
        async_mode -- run the asynchronous variant
        delays -- clique -> rounds of delay (asynchronous mode)
        schedule -- update count -> step size (asynchronous mode), `step` when omitted
        network, coordination -- SimulatedNetwork and Coordination in distributed runs
        target_level -- ignore step and schedule, use target_level_step with the state's
            relaxation instead

        Returns:
        (state, record)
    """
    d = problem.decomposition
    new = _copy_state(state)
    new.iteration = state.iteration + 1
    t = new.iteration
    prices = aggregate_prices(new.chains)
    n_cliques = len(d.cliques)

    if async_mode:
        size = math.ceil(n_cliques / 2)
        active = sorted({(new.cursor + j) % n_cliques for j in range(size)})
        new.cursor = (new.cursor + size) % n_cliques
        busy = {item[2] for item in new.pending}
        launch = [l for l in active if l not in busy]
    else:
        launch = list(range(n_cliques))

    exchange(network, coordination, d, launch, MessageKind.PRICE, lambda l, pair: prices.get((l, pair)))
    sdps = {l: build_dual_subproblem(d, problem.M, problem.w_min, problem.w_max, prices, l) for l in launch}
    solved = solve_cliques(sdps, pool, problem.options)
    round_times = {l: res.seconds for l, res in solved.items()}

    if async_mode:
        delays = delays or {}
        for l in launch:
            new.pending.append((t, t + int(delays.get(l, 0)), l, solved[l]))
        arrived = {l: (launched, res) for launched, arrival, l, res in new.pending if arrival <= t}
        new.pending = [item for item in new.pending if item[1] > t]
    else:
        arrived = {l: (t, res) for l, res in solved.items()}
    _absorb(new, problem, arrived)
    exchange(network, coordination, d, arrived.keys(), MessageKind.SLACK,
             lambda l, pair: new.slacks.get((l, pair)), to_solvers=False)

    fresh = {l for l, launched in new.stamps.items() if launched > new.repriced.get(l, 0)}

    extra = {"lower_bound": float("nan"), "averaged_objective": float("nan"), "min_eigenvalue": float("nan"),
             "repaired": False, "polished": False, "rank_ratio": float("nan"), "recovery_seconds": 0.0,
             "launched": [l + 1 for l in launch], "objective_kind": "recovered"}
    objective = float("nan")
    lower = float(sum(new.values.values())) if len(new.values) == n_cliques else float("nan")
    if len(new.blocks) == n_cliques:
        point = average_feasible(new, d, problem.w_min, problem.w_max)
        new.recovered = polish(problem, point, pool)
        objective = new.recovered.objective
        extra.update(lower_bound=lower, averaged_objective=problem.objective(point.W),
                     min_eigenvalue=point.min_eigenvalue, repaired=point.repaired, polished=new.recovered.polished,
                     rank_ratio=rank_check(new.recovered.W).ratio, recovery_seconds=new.recovered.seconds)

    alpha: Optional[float] = step
    if target_level:
        alpha = None
        if np.isfinite(objective) and np.isfinite(lower):
            _track_lower_bound(new, lower)
            alpha = target_level_step(new.relaxation, objective, lower, disagreement(new))

    consensus, touched = {}, set()
    for pair in sorted(new.chains):
        for r, (left, right) in enumerate(new.chains[pair].equalities):
            if left not in fresh or right not in fresh:
                continue
            if target_level:
                if alpha is None:
                    continue
                rate = alpha
            elif async_mode and schedule is not None:
                rate = schedule(new.counters.get((pair, r), 0) + 1)
            else:
                rate = step
            gap = _update_equality(new, pair, r, rate)
            consensus[(pair, r)] = gap
            if rate * gap > 0:
                touched.update((left, right))
    for l in touched:
        new.repriced[l] = t
    new.step = alpha if alpha is not None else 0.0

    statuses = {l: res.solution.status.value for l, res in solved.items()}
    extra.update(updated_equalities=len(consensus), relaxation=new.relaxation,
                 consensus={f"{i + 1},{k + 1}#{r + 1}": v for ((i, k), r), v in sorted(consensus.items())})
    residual = max(consensus.values(), default=0.0) if consensus or not new.chains else float("inf")

    _, cumulative, distributed = timing_totals([round_times])
    record = IterationRecord(iteration=t, step=new.step, objective=float(objective), residual=float(residual),
                             solve_seconds=round_times, cumulative_seconds=cumulative,
                             distributed_seconds=distributed, statuses=statuses, extra=extra)
    return new, record
