"""End-to-end solves: centralized reference, primal and dual coordination in cumulative or
distributed mode, quadratic-cost runs and scaling benchmarks."""
import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import stats
from tqdm import tqdm

from cliqueopf_core import dual_decomp, primal_decomp
from cliqueopf_core.chordal import assign_coordinators
from cliqueopf_core.dual_decomp import ChainScheme
from cliqueopf_core.hsdp import DiagBox, HermitianSdp, SdpStatus, SolverOptions, solve
from cliqueopf_core.netcase import PowerCase, build_admittance, build_cost_matrix, generate_radial
from cliqueopf_core.quadcost import InnerResult, QuadraticCostSpec, outer_loop
from cliqueopf_core.recover import (TIGHT_RATIO, RankDiagnostic, RecoveryError, VoltageSolution, assemble_W,
                                    linear_cost, rank_check, recover_voltages)
from cliqueopf_core.subproblems import CliqueProblem
from cliqueopf_utils.helper_functions import STEP_RULES, coerce_option, step_size
from cliqueopf_utils.message_network import MessageKind, SequentialPool, SimulatedNetwork, ThreadedPool

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"

myopts = {}
myopts["cliqueopf_max_iters"] = [100, "Iteration cap of the coordination loop"]
myopts["cliqueopf_rel_tol"] = [1e-2, "Relative distance to the centralized objective that counts as converged"]
myopts["cliqueopf_initial_step"] = [1.0, "Initial step size alpha0 (the starting relaxation of the polyak rule)"]
myopts["cliqueopf_step_rule"] = [None, "Step rule: factorial, harmonic, sqrt, constant or polyak (dual only); "
                                 "factorial for primal and polyak for dual when unset"]
myopts["cliqueopf_chain"] = ["chain", "Arrangement of the dual consensus equalities: chain, star or random"]
myopts["cliqueopf_async_updates"] = [False, "Asynchronous dual price updates"]
myopts["cliqueopf_seed"] = [0, "Seed for random equality arrangements"]
myopts["cliqueopf_solver_tol"] = [1e-8, "Relative KKT tolerance of every SDP solve"]
myopts["cliqueopf_solver_max_iter"] = [200, "Interior-point iteration cap of every SDP solve"]
myopts["cliqueopf_stop"] = ["reference", "Stopping rule: reference (centralized objective) or residual"]
myopts["cliqueopf_residual_tol"] = [1e-6, "Threshold of the residual stopping rule"]
myopts["cliqueopf_max_backtracks"] = [10, "Step halvings per shared entry before it is frozen"]
myopts["cliqueopf_max_workers"] = [4, "Worker threads of distributed runs"]
myopts["cliqueopf_reference_bus"] = [None, "1-based angle reference bus, lowest-index generator when unset"]
myopts["cliqueopf_debug_solver"] = [False, "Keep per-iteration interior-point residuals"]


class Mode(str, Enum):
    CENTRALIZED = "centralized"
    CUMULATIVE_PRIMAL = "cumulative-primal"
    CUMULATIVE_DUAL = "cumulative-dual"
    DISTRIBUTED_PRIMAL = "distributed-primal"
    DISTRIBUTED_DUAL = "distributed-dual"

    @property
    def algorithm(self) -> Optional[str]:
        return None if self == Mode.CENTRALIZED else self.value.split("-")[1]

    @property
    def distributed(self) -> bool:
        return self.value.startswith("distributed")


class StopRule(str, Enum):
    REFERENCE = "reference"
    RESIDUAL = "residual"


@dataclass
class RunConfig:
    """
    Attributes
    ----------
    mode -- Mode
    max_iters -- coordination iteration cap
    rel_tol -- reference stopping tolerance
    initial_step -- alpha0 of the step schedule, starting relaxation of the polyak rule
    step_rule -- factorial, harmonic, sqrt, constant or polyak; None picks factorial for
        primal and polyak for dual
    chain -- ChainScheme of the dual equalities
    async_updates -- asynchronous dual rounds
    delays -- 0-based clique -> rounds of delay for asynchronous rounds
    seed -- seed of random arrangements
    solver_tol, solver_max_iter, debug_solver -- SDP solver options
    stop -- StopRule
    residual_tol -- threshold of the residual rule
    max_backtracks -- primal step halvings per entry
    max_workers -- threads of distributed runs
    reference_bus -- 1-based angle reference, None for the default
    link_delay -- simulated seconds per message hop
    order -- 0-based elimination ordering, MCS when None
    """
    mode: Mode = Mode.CENTRALIZED
    max_iters: int = 100
    rel_tol: float = 1e-2
    initial_step: float = 1.0
    step_rule: Optional[str] = None
    chain: ChainScheme = ChainScheme.CHAIN
    async_updates: bool = False
    delays: Dict[int, int] = field(default_factory=dict)
    seed: int = 0
    solver_tol: float = 1e-8
    solver_max_iter: int = 200
    stop: StopRule = StopRule.REFERENCE
    residual_tol: float = 1e-6
    max_backtracks: int = 10
    max_workers: int = 4
    reference_bus: Optional[int] = None
    debug_solver: bool = False
    link_delay: float = 0.0
    order: Optional[Sequence[int]] = None

    def __post_init__(self):
        self.mode = Mode(self.mode)
        self.chain = ChainScheme(self.chain)
        self.stop = StopRule(self.stop)
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.rel_tol > 0:
            raise ValueError(f"rel_tol must be > 0, got {self.rel_tol}")
        if not self.initial_step > 0:
            raise ValueError(f"initial_step must be > 0, got {self.initial_step}")
        if self.step_rule is None:
            self.step_rule = "polyak" if self.mode.algorithm == "dual" else "factorial"
        if self.step_rule not in STEP_RULES:
            raise ValueError(f"unknown step rule {self.step_rule!r}, expected one of {STEP_RULES}")
        if self.step_rule == "polyak" and self.mode.algorithm == "primal":
            raise ValueError("the polyak step rule needs dual bounds; use it with a dual mode")
        if self.max_workers < 1:
            raise ValueError(f"max_workers must be >= 1, got {self.max_workers}")

    @classmethod
    def from_opts(cls, opts: Optional[dict] = None, **overrides) -> "RunConfig":
        """ Config from a myopts-style dict (the defaults when omitted) plus explicit keyword
            overrides. String values are typed like the matching default; overrides set to
            None are ignored.
        """
        opts = myopts if opts is None else opts
        names = {f.name for f in fields(cls)}
        values = {}
        for key, entry in opts.items():
            name = key[len("cliqueopf_"):]
            if name in names:
                values[name] = coerce_option(entry[0], myopts.get(key, [None])[0])
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def solver_options(self) -> SolverOptions:
        return SolverOptions(tol=self.solver_tol, max_iter=self.solver_max_iter, debug=self.debug_solver)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["mode"], doc["chain"], doc["stop"] = self.mode.value, self.chain.value, self.stop.value
        doc["delays"] = {str(l + 1): k for l, k in sorted(self.delays.items())}
        doc["order"] = None if self.order is None else [v + 1 for v in self.order]
        return doc


@dataclass
class RunReport:
    """
    Outcome of one solve.

    Attributes
    ----------
    mode -- Mode value
    config -- RunConfig echo
    iterations -- IterationRecord dicts in order
    converged -- the stopping rule fired
    iteration_count -- coordination rounds run
    objective -- final objective Tr(M W)
    reference_objective -- centralized objective the reference rule compared against
    centralized_seconds -- solver CPU time of the reference solve
    cumulative_seconds -- sum of every clique solve time
    distributed_seconds -- sum over rounds of the slowest clique solve
    message_counts -- simulated messages by kind
    status -- SdpStatus value of a centralized solve, "coordinated" otherwise
    voltages -- VoltageSolution or None
    rank -- RankDiagnostic of the final W
    warnings -- frozen entries, solver failures, recovery problems
    outer -- quadratic outer-loop trace
    quadratic_objective -- quadratic cost of the final W
    W, state -- final matrix and coordination state (not serialized)
    """
    mode: str
    config: dict
    iterations: List[dict] = field(default_factory=list)
    converged: bool = False
    iteration_count: int = 0
    objective: float = float("nan")
    reference_objective: Optional[float] = None
    centralized_seconds: float = 0.0
    cumulative_seconds: float = 0.0
    distributed_seconds: float = 0.0
    message_counts: Dict[str, int] = field(default_factory=lambda: {kind.value: 0 for kind in MessageKind})
    status: str = "coordinated"
    voltages: Optional[VoltageSolution] = None
    rank: Optional[RankDiagnostic] = None
    warnings: List[str] = field(default_factory=list)
    outer: List[dict] = field(default_factory=list)
    quadratic_objective: Optional[float] = None
    W: Optional[np.ndarray] = field(default=None, repr=False)
    state: Optional[object] = field(default=None, repr=False)

    def to_dict(self, timing: bool = True) -> dict:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "mode": self.mode,
            "config": self.config,
            "status": self.status,
            "converged": self.converged,
            "iteration_count": self.iteration_count,
            "objective": self.objective,
            "reference_objective": self.reference_objective,
            "message_counts": dict(self.message_counts),
            "voltages": self.voltages.to_dict() if self.voltages is not None else None,
            "rank": self.rank.to_dict() if self.rank is not None else None,
            "warnings": list(self.warnings),
            "iterations": [dict(record) for record in self.iterations],
        }
        if self.voltages is not None and "costs" in self.config:
            doc["linear_cost"] = linear_cost(self.voltages.injections, np.asarray(self.config["costs"]))
        if self.outer:
            doc["outer"] = self.outer
            doc["quadratic_objective"] = self.quadratic_objective
        if timing:
            doc["timing"] = {"centralized_seconds": self.centralized_seconds,
                             "cumulative_seconds": self.cumulative_seconds,
                             "distributed_seconds": self.distributed_seconds}
        else:
            for record in doc["iterations"]:
                for key in ("solve_seconds", "cumulative_seconds", "distributed_seconds"):
                    record.pop(key, None)
        return doc

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), indent=2, default=_json_default)

    def save(self, path: str):
        Path(path).write_text(self.to_json())

    def trace_frame(self) -> pd.DataFrame:
        """One row per coordination round"""
        columns = ["iteration", "step", "objective", "residual", "backtracks", "cumulative_seconds",
                   "distributed_seconds"]
        rows = [{key: record.get(key) for key in columns} for record in self.iterations]
        return pd.DataFrame(rows, columns=columns)


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def _reference_bus(config: RunConfig) -> Optional[int]:
    return None if config.reference_bus is None else int(config.reference_bus) - 1


def _recover(report: RunReport, W: np.ndarray, case: PowerCase, config: RunConfig, Y: np.ndarray):
    report.W = W
    report.rank = rank_check(W)
    try:
        report.voltages = recover_voltages(W, case, _reference_bus(config), Y=Y)
        report.warnings.extend(report.voltages.warnings)
    except RecoveryError as e:
        report.warnings.append(f"voltage recovery failed: {e}")
        logger.warning(f"[ ! ] voltage recovery failed: {e}")


def solve_centralized(case: PowerCase, config: Optional[RunConfig] = None,
                      costs: Optional[Sequence[float]] = None) -> RunReport:
    """ One SDP solve of the full relaxation: min Tr(M W), w_min <= W_ii <= w_max, W PSD.

        Keyword arguments:
        case -- the network
        config -- RunConfig, only the solver options and reference bus are used
        costs -- linear costs, the case's c1 by default

        Returns:
        report -- RunReport whose objective serves as the reference of decomposed runs
    """
    config = config or RunConfig()
    Y = build_admittance(case)
    costs = case.c1 if costs is None else np.asarray(costs, dtype=float)
    M = build_cost_matrix(case, costs, Y=Y)
    sdp = HermitianSdp(objective=M, diag_boxes=[DiagBox(i, float(case.w_min[i]), float(case.w_max[i]))
                                                for i in range(case.n)])
    start = time.thread_time()
    solution = solve(sdp, options=config.solver_options())
    seconds = time.thread_time() - start

    echo = config.to_dict()
    echo["mode"] = Mode.CENTRALIZED.value
    echo["costs"] = list(map(float, costs))
    report = RunReport(mode=Mode.CENTRALIZED.value, config=echo, iteration_count=1, status=solution.status.value,
                       objective=solution.objective_value, centralized_seconds=seconds,
                       cumulative_seconds=seconds, distributed_seconds=seconds,
                       converged=solution.status == SdpStatus.OPTIMAL)
    report.reference_objective = report.objective
    if solution.status in (SdpStatus.OPTIMAL, SdpStatus.MAX_ITER):
        _recover(report, solution.X, case, config, Y)
    else:
        report.warnings.append(f"centralized relaxation is {solution.status.value}")
        logger.warning(f"[ ! ] centralized relaxation is {solution.status.value}")
    logger.info(f"[ * ] centralized objective {report.objective:.8g} ({solution.status.value}, "
                f"{solution.iterations} IPM iterations)")
    return report


def _send_case_data(network: SimulatedNetwork, case: PowerCase, problem: CliqueProblem, coordination):
    for l, clique in enumerate(problem.decomposition.cliques):
        solver = coordination.solvers[l]
        for i in clique:
            bus = case.buses[i]
            network.send(MessageKind.CASE_DATA, i, solver,
                         {"id": bus.id, "v_min": bus.v_min, "v_max": bus.v_max, "c1": bus.c1, "c2": bus.c2})


def _reached(record, reference: Optional[float], config: RunConfig, rank_gate: bool = False) -> bool:
    """ Stopping rule of one round. With rank_gate (the centralized relaxation is exact) the
        round's recovered W must also pass the rank-one test.
    """
    if rank_gate and not record.extra.get("rank_ratio", float("inf")) <= TIGHT_RATIO:
        return False
    if config.stop == StopRule.RESIDUAL:
        return record.residual <= config.residual_tol and np.isfinite(record.objective)
    if reference is None or not np.isfinite(record.objective):
        return False
    return abs(record.objective - reference) <= config.rel_tol * max(abs(reference), 1e-8)


def _final_matrix(problem: CliqueProblem, state, config: RunConfig, report: RunReport) -> Optional[np.ndarray]:
    d = problem.decomposition
    if len(state.blocks) < len(d.cliques):
        return None
    if config.mode.algorithm == "primal":
        return assemble_W(d, state.blocks, state.solved_shared).W
    if state.recovered is not None:
        return state.recovered.W
    try:
        point = dual_decomp.average_feasible(state, d, problem.w_min, problem.w_max)
    except ValueError as e:
        report.warnings.append(f"feasible averaging failed: {e}")
        return None
    blocks = {l: point.W[np.ix_(q, q)] for l, q in enumerate(d.cliques)}
    return assemble_W(d, blocks).W


def run(case: PowerCase, config: RunConfig, costs: Optional[Sequence[float]] = None,
        reference: Optional[float] = None, problem: Optional[CliqueProblem] = None, state=None) -> RunReport:
    """ Solve a case in the configured mode.

        Decomposed modes iterate the primal or dual algorithm until the stopping rule fires
        or max_iters rounds have run. Distributed modes solve the cliques on a thread pool
        and route every inter-bus quantity through a SimulatedNetwork of the power lines;
        cumulative modes solve the cliques one after another with no messages.
        Non-convergence is reported through `converged`, never raised.

        Keyword arguments:
        case -- the network
        config -- RunConfig
        costs -- linear costs, the case's c1 by default
        reference -- centralized objective for the reference rule, solved here when omitted
        problem -- prebuilt CliqueProblem (quadratic runs reuse one decomposition)
        state -- coordination state to warm-start from

        Returns:
        report -- RunReport
    """
    if config.mode == Mode.CENTRALIZED:
        return solve_centralized(case, config, costs)

    costs = case.c1 if costs is None else np.asarray(costs, dtype=float)
    echo = config.to_dict()
    echo["costs"] = list(map(float, costs))
    report = RunReport(mode=config.mode.value, config=echo)

    rank_gate = False
    if config.stop == StopRule.REFERENCE and reference is None:
        central = solve_centralized(case, config, costs)
        reference = central.objective
        report.centralized_seconds = central.centralized_seconds
        rank_gate = central.rank is not None and central.rank.ratio <= TIGHT_RATIO
    report.reference_objective = reference

    Y = build_admittance(case)
    if problem is None:
        problem = CliqueProblem.from_case(case, costs, order=config.order, options=config.solver_options())
    d = problem.decomposition
    coordination = assign_coordinators(d)
    network = SimulatedNetwork(case.line_graph(), config.link_delay) if config.mode.distributed else None
    if network is not None:
        _send_case_data(network, case, problem, coordination)

    primal = config.mode.algorithm == "primal"
    target_level = config.step_rule == "polyak"
    if state is None:
        state = primal_decomp.initial_state(problem, config.initial_step) if primal else \
            dual_decomp.initial_state(problem, config.chain, config.seed, config.initial_step)
    elif not primal:
        state = dual_decomp.restart(state, config.initial_step)

    def schedule(count: int) -> float:
        if target_level:
            return config.initial_step
        return step_size(config.initial_step, count, config.step_rule)

    logger.info(f"[ * ] {config.mode.value}: {len(d.cliques)} clique(s), {len(d.shared_entries)} shared entries")
    pool = ThreadedPool(config.max_workers) if config.mode.distributed else SequentialPool()
    with pool:
        for t in range(1, config.max_iters + 1):
            step = schedule(t)
            if primal:
                state, record = primal_decomp.primal_iterate(problem, state, pool, step, config.max_backtracks,
                                                             network, coordination)
            else:
                state, record = dual_decomp.dual_iterate(problem, state, pool, step, config.async_updates,
                                                         config.delays, schedule, network, coordination,
                                                         target_level=target_level)
            report.iterations.append(record.to_dict())
            report.iteration_count = t
            report.cumulative_seconds += record.cumulative_seconds
            report.distributed_seconds += record.distributed_seconds
            report.objective = record.objective
            for pair in record.frozen:
                report.warnings.append(f"iteration {t}: entry ({pair[0] + 1},{pair[1] + 1}) frozen after "
                                       f"{config.max_backtracks} step-backs")
            for l, status in record.statuses.items():
                if status not in (SdpStatus.OPTIMAL.value, SdpStatus.MAX_ITER.value):
                    report.warnings.append(f"iteration {t}: clique {l + 1} subproblem {status}")
            logger.debug(f"[ Dbg ] iteration {t}: objective {record.objective:.8g} residual {record.residual:.3e}")
            if _reached(record, reference, config, rank_gate):
                report.converged = True
                break

    if network is not None:
        report.message_counts = network.counts()
        if network.one_hop_fraction() < 1.0:
            raise RuntimeError("simulated network carried a message between non-adjacent buses")

    report.state = state
    W = _final_matrix(problem, state, config, report)
    if W is not None:
        report.objective = problem.objective(W) if not np.isfinite(report.objective) else report.objective
        _recover(report, W, case, config, Y)

    if report.converged:
        logger.info(f"[ * ] converged in {report.iteration_count} iteration(s), objective {report.objective:.8g}")
    else:
        logger.warning(f"[ ! ] no convergence in {report.iteration_count} iteration(s), "
                       f"objective {report.objective:.8g}, reference {reference}")
    return report


def solve_quadratic(case: PowerCase, config: RunConfig, tol_z: float = 1e-4, max_outer: int = 300,
                    step_factor: float = 0.1) -> RunReport:
    """ Quadratic costs: the outer z-loop around the configured mode.

        Every inner solve shares one decomposition (built from the admittance pattern) and,
        in decomposed modes, starts from the previous inner solve's shared values or prices.

        Returns:
        report -- the last inner report, extended with the outer trace, the quadratic
            objective and timing and message totals over every inner solve
    """
    spec = QuadraticCostSpec.from_case(case)
    Y = spec.Y
    base = None if config.mode == Mode.CENTRALIZED else \
        CliqueProblem.from_case(case, order=config.order, options=config.solver_options(), pattern=Y)
    inner_reports: List[RunReport] = []
    warm = {"state": None}

    def inner(costs: np.ndarray) -> InnerResult:
        if base is None:
            report = solve_centralized(case, config, costs)
        else:
            problem = base.with_costs(build_cost_matrix(case, costs, Y=Y))
            report = run(case, config, costs=costs, problem=problem, state=warm["state"])
            warm["state"] = report.state
        inner_reports.append(report)
        return InnerResult(W=report.W, converged=report.converged and report.W is not None, report=report)

    outer = outer_loop(spec, inner, tol_z=tol_z, max_outer=max_outer, step_factor=step_factor)
    if outer.iterate is not None:
        report = outer.iterate.inner.report
    else:
        report = inner_reports[-1]
        report.warnings.append("outer loop aborted: inner solve did not converge at z = 0")
    report.outer = outer.trace
    report.quadratic_objective = outer.objective
    report.converged = outer.converged
    report.cumulative_seconds = sum(r.cumulative_seconds for r in inner_reports)
    report.distributed_seconds = sum(r.distributed_seconds for r in inner_reports)
    report.centralized_seconds = sum(r.centralized_seconds for r in inner_reports)
    report.message_counts = {kind.value: sum(r.message_counts.get(kind.value, 0) for r in inner_reports)
                             for kind in MessageKind}
    if outer.aborted:
        report.warnings.append("outer loop aborted after an inner solve failed to converge")
    if outer.iterate is not None and outer.iterate.degenerate:
        report.warnings.append("inner optimum is not rank one; the outer gradient is a supergradient")
    logger.info(f"[ * ] quadratic objective {outer.objective:.8g} after {outer.iterations} outer iteration(s)")
    return report


SCALING_COLUMNS = ["n", "mode", "mean_cumulative_s", "mean_distributed_s", "success_rate"]


def benchmark_scaling(sizes: Sequence[int], seeds: Union[int, Sequence[int]], config: RunConfig,
                      out: Optional[str] = None, tree: bool = False) -> pd.DataFrame:
    """ Mean solver time and success rate against network size.

        Keyword arguments:
        sizes -- bus counts, each >= 2
        seeds -- seeds per size (a count means range(count))
        config -- RunConfig of every run
        out -- CSV path; a plot-data JSON is written next to it
        tree -- random trees instead of stars

        Returns:
        table -- DataFrame with columns n, mode, mean_cumulative_s, mean_distributed_s, success_rate
    """
    seeds = list(range(seeds)) if isinstance(seeds, int) else list(seeds)
    if any(n < 2 for n in sizes):
        raise ValueError(f"every size must be >= 2, got {list(sizes)}")
    rows = []
    if seeds:
        for n in tqdm(list(sizes), desc="sizes"):
            cumulative, distributed, successes = [], [], 0
            for seed in tqdm(seeds, desc=f"n={n}", leave=False):
                report = run(generate_radial(n, seed, tree=tree), config)
                cumulative.append(report.cumulative_seconds)
                distributed.append(report.distributed_seconds)
                successes += int(report.converged)
            rows.append({"n": n, "mode": config.mode.value, "mean_cumulative_s": float(np.mean(cumulative)),
                         "mean_distributed_s": float(np.mean(distributed)), "success_rate": successes / len(seeds)})
    table = pd.DataFrame(rows, columns=SCALING_COLUMNS)

    if out is not None:
        table.to_csv(out, index=False)
        plot = {"n": table["n"].tolist(), "cumulative": table["mean_cumulative_s"].tolist(),
                "distributed": table["mean_distributed_s"].tolist(), "success_rate": table["success_rate"].tolist(),
                "mode": config.mode.value}
        Path(out).with_suffix(".plot.json").write_text(json.dumps(plot, indent=2))
        logger.info(f"[ * ] wrote {out}")
    return table


def linear_fit_r2(table: pd.DataFrame, column: str = "mean_cumulative_s") -> float:
    """R^2 of a least-squares line through (n, column)"""
    if len(table) < 2:
        raise ValueError("a linear fit needs at least two sizes")
    fit = stats.linregress(table["n"].astype(float), table[column].astype(float))
    return float(fit.rvalue ** 2)


def size_independence(table: pd.DataFrame, column: str = "mean_distributed_s") -> float:
    """max / min of the distributed metric across sizes"""
    values = table[column].astype(float)
    return float(values.max() / values.min())
