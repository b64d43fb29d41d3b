"""Small dense complex-Hermitian SDP engine.

Standard form::

    minimize    Tr(A0 X)
    subject to  Tr(Aj X) = bj            for every equality j
                lower_i <= X_ii <= upper_i for every diagonal box
                X Hermitian PSD

The problem is solved on its real embedding H -> [[Re H, -Im H], [Im H, Re H]] by a
primal-dual path-following interior-point method (HKM direction, Mehrotra
predictor-corrector). Returned multipliers are value sensitivities: y_j = d value / d b_j.
"""
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg as sla

logger = logging.getLogger(__name__)


class SdpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    MAX_ITER = "max_iter"


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-8
    max_iter: int = 200
    step_fraction: float = 0.98
    debug: bool = False


@dataclass(frozen=True)
class DiagBox:
    index: int
    lower: float
    upper: float

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError(f"box on X[{self.index},{self.index}] has lower {self.lower} > upper {self.upper}")

    @property
    def degenerate(self) -> bool:
        return self.lower == self.upper


@dataclass(frozen=True)
class Equality:
    matrix: np.ndarray
    rhs: float


def _is_hermitian(A: np.ndarray, tol: float = 1e-10) -> bool:
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    return bool(np.max(np.abs(A - A.conj().T), initial=0.0) <= tol * scale)


@dataclass
class HermitianSdp:
    objective: np.ndarray
    equalities: List[Equality] = field(default_factory=list)
    diag_boxes: List[DiagBox] = field(default_factory=list)

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=complex)
        m = self.objective.shape[0]
        if self.objective.ndim != 2 or self.objective.shape != (m, m) or m < 1:
            raise ValueError(f"objective must be a non-empty square matrix, got shape {self.objective.shape}")
        if not _is_hermitian(self.objective):
            raise ValueError("objective is not Hermitian")
        if not np.all(np.isfinite(self.objective)):
            raise ValueError("objective has non-finite entries")

        checked = []
        for j, eq in enumerate(self.equalities):
            A = np.asarray(eq.matrix, dtype=complex)
            if A.shape != (m, m):
                raise ValueError(f"equality {j} has shape {A.shape}, expected {(m, m)}")
            if not _is_hermitian(A):
                raise ValueError(f"equality {j} matrix is not Hermitian")
            checked.append(Equality(A, float(eq.rhs)))
        self.equalities = checked

        indices = [box.index for box in self.diag_boxes]
        if len(set(indices)) != len(indices):
            raise ValueError(f"more than one box on the same diagonal: {indices}")
        for box in self.diag_boxes:
            if not 0 <= box.index < m:
                raise ValueError(f"box index {box.index} out of range for m={m}")

    @property
    def m(self) -> int:
        return self.objective.shape[0]


@dataclass(frozen=True)
class KktResiduals:
    primal: float
    dual: float
    gap: float


@dataclass
class SdpSolution:
    """
    Attributes
    ----------
    X -- m x m Hermitian PSD matrix
    eq_multipliers -- y_j per equality, y_j = d value / d b_j
    box_multipliers -- (upper, lower) pair per box, both >= 0
    objective_value -- Tr(A0 X)
    status -- SdpStatus
    dual_value -- dual objective of the returned multipliers
    iterations -- interior-point iterations used
    trace -- per-iteration residuals when SolverOptions.debug is set
    """
    X: np.ndarray
    eq_multipliers: np.ndarray
    box_multipliers: List[Tuple[float, float]]
    objective_value: float
    status: SdpStatus
    dual_value: float = float("nan")
    iterations: int = 0
    trace: Optional[List[dict]] = None


@dataclass
class RealSdp:
    """ Real symmetric conic problem over S^N_+ x R^q_+ produced by embed_real.

        Rows are equalities first, then box rows. Box j becomes one row when degenerate and
        a (lower, upper) row pair otherwise; the LP slack of a lower row has coefficient -1,
        of an upper row +1. All right-hand sides are doubled so that the embedded objective
        is twice the original one and the multipliers are unchanged.
    """
    C: np.ndarray
    A: np.ndarray
    b: np.ndarray
    lp_rows: np.ndarray
    lp_coefs: np.ndarray
    box_rows: List[Tuple[int, ...]]
    n_eq: int

    @property
    def N(self) -> int:
        return self.C.shape[0]


def embed_matrix(H: np.ndarray) -> np.ndarray:
    H = np.asarray(H, dtype=complex)
    return np.block([[H.real, -H.imag], [H.imag, H.real]])


def unembed_matrix(Z: np.ndarray) -> np.ndarray:
    m = Z.shape[0] // 2
    X = 0.5 * ((Z[:m, :m] + Z[m:, m:]) + 1j * (Z[m:, :m] - Z[:m, m:]))
    return 0.5 * (X + X.conj().T)


def embed_real(p: HermitianSdp) -> RealSdp:
    m = p.m
    mats, rhs, lp_rows, lp_coefs, box_rows = [], [], [], [], []
    for eq in p.equalities:
        mats.append(embed_matrix(eq.matrix))
        rhs.append(2.0 * eq.rhs)

    for box in p.diag_boxes:
        E = np.zeros((m, m))
        E[box.index, box.index] = 1.0
        E = embed_matrix(E)
        if box.degenerate:
            box_rows.append((len(rhs),))
            mats.append(E)
            rhs.append(2.0 * box.lower)
        else:
            lo, hi = len(rhs), len(rhs) + 1
            box_rows.append((lo, hi))
            mats.extend([E, E])
            rhs.extend([2.0 * box.lower, 2.0 * box.upper])
            lp_rows.extend([lo, hi])
            lp_coefs.extend([-1.0, 1.0])

    N = 2 * m
    A = np.array(mats) if mats else np.zeros((0, N, N))
    return RealSdp(C=embed_matrix(p.objective), A=A, b=np.array(rhs, dtype=float),
                   lp_rows=np.array(lp_rows, dtype=int), lp_coefs=np.array(lp_coefs, dtype=float),
                   box_rows=box_rows, n_eq=len(p.equalities))


@dataclass
class _Iterate:
    Z: np.ndarray
    s: np.ndarray
    y: np.ndarray
    S: np.ndarray
    sig: np.ndarray

    def copy(self) -> "_Iterate":
        return _Iterate(self.Z.copy(), self.s.copy(), self.y.copy(), self.S.copy(), self.sig.copy())


def _sym(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X + X.T)


def _max_step_psd(X: np.ndarray, dX: np.ndarray) -> float:
    try:
        L = np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        return 0.0
    T = sla.solve_triangular(L, dX, lower=True)
    T = sla.solve_triangular(L, T.T, lower=True)
    lam = float(np.linalg.eigvalsh(_sym(T))[0])
    return np.inf if lam >= 0 else -1.0 / lam


def _max_step_lp(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0
    return float(np.min(-v[neg] / dv[neg])) if np.any(neg) else np.inf


class _InteriorPoint:
    """Mehrotra predictor-corrector with the HKM search direction on a RealSdp"""

    def __init__(self, rs: RealSdp, options: SolverOptions):
        self.rs = rs
        self.options = options
        self.nu = rs.N + rs.lp_rows.size
        self.norm_b = float(np.linalg.norm(rs.b))
        self.norm_C = float(np.linalg.norm(rs.C))
        self.trace: List[dict] = []

    def _op(self, Z: np.ndarray, s: np.ndarray) -> np.ndarray:
        out = np.einsum("kij,ij->k", self.rs.A, Z)
        if s.size:
            out = out + np.bincount(self.rs.lp_rows, weights=self.rs.lp_coefs * s, minlength=self.rs.b.size)
        return out

    def _adj(self, y: np.ndarray) -> np.ndarray:
        return np.tensordot(y, self.rs.A, axes=1) if y.size else np.zeros_like(self.rs.C)

    def _start(self) -> _Iterate:
        rs, N = self.rs, self.rs.N
        a_norms = np.linalg.norm(rs.A.reshape(rs.b.size, -1), axis=1) if rs.b.size else np.zeros(0)
        xi = max(10.0, np.sqrt(N), *(N * (1.0 + np.abs(rs.b)) / (1.0 + a_norms)))
        eta = max(10.0, np.sqrt(N), self.norm_C, *a_norms)
        q = rs.lp_rows.size
        return _Iterate(Z=xi * np.eye(N), s=xi * np.ones(q), y=np.zeros(rs.b.size),
                        S=eta * np.eye(N), sig=eta * np.ones(q))

    def _residuals(self, it: _Iterate):
        rs = self.rs
        rp = rs.b - self._op(it.Z, it.s)
        Rd = rs.C - self._adj(it.y) - it.S
        rd = -rs.lp_coefs * it.y[rs.lp_rows] - it.sig if it.s.size else np.zeros(0)
        return rp, Rd, rd

    def _direction(self, it: _Iterate, Sinv: np.ndarray, rp, Rd, rd, G: np.ndarray, g: np.ndarray):
        rs = self.rs
        ZAS = it.Z @ rs.A @ Sinv
        schur = _sym(np.einsum("rij,kij->rk", rs.A, ZAS))
        lp_rhs = np.zeros(rs.b.size)
        if it.s.size:
            ratio = it.s / it.sig
            schur = schur + np.diag(np.bincount(rs.lp_rows, weights=ratio, minlength=rs.b.size))
            lp_rhs = np.bincount(rs.lp_rows, weights=rs.lp_coefs * (g / it.sig - it.s - ratio * rd),
                                 minlength=rs.b.size)
        rhs = rp - self._op(G - it.Z - it.Z @ Rd @ Sinv, np.zeros(0)) - lp_rhs

        try:
            dy = sla.cho_solve(sla.cho_factor(schur), rhs)
        except (np.linalg.LinAlgError, ValueError):
            dy = np.linalg.lstsq(schur, rhs, rcond=None)[0]

        dS = Rd - self._adj(dy)
        dZ = G - it.Z - _sym(it.Z @ dS @ Sinv)
        if it.s.size:
            dsig = rd - rs.lp_coefs * dy[rs.lp_rows]
            ds = g / it.sig - it.s - (it.s / it.sig) * dsig
        else:
            dsig = ds = np.zeros(0)
        return _Iterate(Z=_sym(dZ), s=ds, y=dy, S=_sym(dS), sig=dsig)

    def _steps(self, it: _Iterate, d: _Iterate) -> Tuple[float, float]:
        ap = min(_max_step_psd(it.Z, d.Z), _max_step_lp(it.s, d.s))
        ad = min(_max_step_psd(it.S, d.S), _max_step_lp(it.sig, d.sig))
        tau = self.options.step_fraction
        return min(1.0, tau * ap), min(1.0, tau * ad)

    def _complementarity(self, Z, S, s, sig) -> float:
        return float(np.sum(Z * S) + s @ sig)

    def run(self):
        rs, opts = self.rs, self.options
        it = self._start()
        best, best_err, best_meas = it.copy(), np.inf, None
        status = None
        k = 0

        for k in range(1, opts.max_iter + 1):
            rp, Rd, rd = self._residuals(it)
            pobj = float(np.sum(rs.C * it.Z))
            dobj = float(rs.b @ it.y)
            dual_abs = float(np.sqrt(np.sum(Rd * Rd) + rd @ rd))
            pres = float(np.linalg.norm(rp)) / (1.0 + self.norm_b)
            dres = dual_abs / (1.0 + self.norm_C)
            comp = self._complementarity(it.Z, it.S, it.s, it.sig)
            gap = abs(comp) / (1.0 + abs(pobj) + abs(dobj))
            err = max(pres, dres, gap)
            if err < best_err:
                best, best_err, best_meas = it.copy(), err, (pres, dres, gap)

            if err <= 0.1 * opts.tol:
                status = SdpStatus.OPTIMAL
                break

            # Diverging iterates normalize into infeasibility or unboundedness certificates
            if dobj > 1e-6 * (1.0 + self.norm_b) and (self.norm_C + dual_abs) / dobj < 1e-8:
                status = SdpStatus.INFEASIBLE
                break
            if -pobj > 1e-6 and (self.norm_b + float(np.linalg.norm(rp))) / (-pobj) < 1e-8:
                status = SdpStatus.UNBOUNDED
                break

            mu = comp / self.nu
            try:
                Sinv = sla.cho_solve(sla.cho_factor(it.S), np.eye(rs.N))
                pred = self._direction(it, Sinv, rp, Rd, rd, np.zeros_like(it.Z), np.zeros_like(it.s))
                ap, ad = self._steps(it, pred)
                mu_aff = self._complementarity(it.Z + ap * pred.Z, it.S + ad * pred.S,
                                               it.s + ap * pred.s, it.sig + ad * pred.sig) / self.nu
                centering = min(1.0, max(0.0, mu_aff / mu)) ** 3 if mu > 0 else 0.0
                G = _sym(centering * mu * Sinv - pred.Z @ pred.S @ Sinv)
                g = centering * mu - pred.s * pred.sig
                corr = self._direction(it, Sinv, rp, Rd, rd, G, g)
                ap, ad = self._steps(it, corr)
            except (np.linalg.LinAlgError, ValueError) as e:
                logger.debug(f"[ Dbg ] interior point stalled at iteration {k}: {e}")
                break

            if opts.debug:
                row = {"iteration": k, "mu": mu, "primal": pres, "dual": dres, "gap": gap,
                       "step_primal": ap, "step_dual": ad}
                self.trace.append(row)
                logger.debug(f"[ Dbg ] ipm {row}")

            if not (np.all(np.isfinite(corr.Z)) and np.all(np.isfinite(corr.S))) or max(ap, ad) < 1e-12:
                break

            it = _Iterate(Z=_sym(it.Z + ap * corr.Z), s=it.s + ap * corr.s, y=it.y + ad * corr.y,
                          S=_sym(it.S + ad * corr.S), sig=it.sig + ad * corr.sig)

        if status is None:
            pres, dres, gap = best_meas if best_meas is not None else (np.inf, np.inf, np.inf)
            if best_err <= opts.tol:
                status = SdpStatus.OPTIMAL
            elif pres > 1e-4 and dres < 1e-6 and float(rs.b @ best.y) > 0:
                status = SdpStatus.INFEASIBLE
            elif dres > 1e-4 and pres < 1e-6 and float(np.sum(rs.C * best.Z)) < 0:
                status = SdpStatus.UNBOUNDED
            else:
                status = SdpStatus.MAX_ITER
            it = best
        return it, status, k


def _diag_intervals(p: HermitianSdp) -> Tuple[np.ndarray, np.ndarray]:
    lo = np.zeros(p.m)
    hi = np.full(p.m, np.inf)
    for box in p.diag_boxes:
        lo[box.index] = max(0.0, box.lower)
        hi[box.index] = box.upper
    return lo, hi


def _presolve(p: HermitianSdp) -> Optional[SdpStatus]:
    """Cheap exact checks for the infeasible and unbounded cases the IPM handles slowly"""
    lo, hi = _diag_intervals(p)
    if np.any(hi < lo - 1e-12):
        return SdpStatus.INFEASIBLE

    for eq in p.equalities:
        A = eq.matrix
        if np.max(np.abs(A - np.diag(np.diag(A))), initial=0.0) > 0 or np.max(np.abs(np.diag(A).imag)) > 0:
            continue
        a = np.diag(A).real
        with np.errstate(invalid="ignore"):
            low = np.sum(np.where(a > 0, a * lo, 0.0)) + np.sum(np.where(a < 0, a * hi, 0.0))
            high = np.sum(np.where(a > 0, a * hi, 0.0)) + np.sum(np.where(a < 0, a * lo, 0.0))
        slack = 1e-9 * (1.0 + abs(eq.rhs))
        if eq.rhs < low - slack or eq.rhs > high + slack:
            return SdpStatus.INFEASIBLE

    if not p.equalities:
        free = np.flatnonzero(np.isinf(hi))
        if free.size and np.linalg.eigvalsh(p.objective[np.ix_(free, free)])[0] < -1e-12:
            return SdpStatus.UNBOUNDED
    return None


def _empty_solution(p: HermitianSdp, status: SdpStatus) -> SdpSolution:
    value = np.inf if status == SdpStatus.INFEASIBLE else -np.inf
    return SdpSolution(X=np.zeros((p.m, p.m), dtype=complex), eq_multipliers=np.zeros(len(p.equalities)),
                       box_multipliers=[(0.0, 0.0)] * len(p.diag_boxes), objective_value=value, status=status)


def solve(p: HermitianSdp, tol: Optional[float] = None, options: Optional[SolverOptions] = None) -> SdpSolution:
    """ Solve a HermitianSdp.

        Keyword arguments:
        p -- the problem
        tol -- relative KKT tolerance, overrides options.tol
        options -- SolverOptions

        Returns:
        solution -- SdpSolution; infeasible and unbounded problems are reported through
            its status, never raised
    """
    options = options or SolverOptions()
    if tol is not None:
        options = replace(options, tol=tol)

    early = _presolve(p)
    if early is not None:
        logger.debug(f"[ Dbg ] presolve: {early.value}")
        return _empty_solution(p, early)

    rs = embed_real(p)
    if rs.b.size == 0:
        # min Tr(A0 X) over the PSD cone alone; presolve already ruled out unboundedness
        return SdpSolution(X=np.zeros((p.m, p.m), dtype=complex), eq_multipliers=np.zeros(0), box_multipliers=[],
                           objective_value=0.0, status=SdpStatus.OPTIMAL, dual_value=0.0)

    ipm = _InteriorPoint(rs, options)
    it, status, iterations = ipm.run()
    if status in (SdpStatus.INFEASIBLE, SdpStatus.UNBOUNDED):
        solution = _empty_solution(p, status)
        solution.iterations = iterations
        solution.trace = ipm.trace if options.debug else None
        return solution

    X = unembed_matrix(it.Z)
    y = it.y
    boxes = []
    for rows in rs.box_rows:
        if len(rows) == 1:
            boxes.append((max(-y[rows[0]], 0.0), max(y[rows[0]], 0.0)))
        else:
            boxes.append((max(-y[rows[1]], 0.0), max(y[rows[0]], 0.0)))

    if status == SdpStatus.MAX_ITER:
        logger.warning(f"[ ! ] SDP solve hit {options.max_iter} iterations; returning the best iterate")
    return SdpSolution(X=X, eq_multipliers=y[:rs.n_eq].copy(), box_multipliers=boxes,
                       objective_value=float(np.real(np.sum(p.objective.T * X))),
                       status=status, dual_value=0.5 * float(rs.b @ y), iterations=iterations,
                       trace=ipm.trace if options.debug else None)


def kkt_residuals(p: HermitianSdp, s: SdpSolution) -> KktResiduals:
    """ Primal feasibility, dual feasibility and complementarity of a solution, in the
        original complex space and relative to the data scale.

        The dual slack is S = A0 - sum_j y_j A_j - sum_i (lower_i - upper_i) E_ii
    """
    X = s.X
    value = float(np.real(np.sum(p.objective.T * X)))
    b = np.array([eq.rhs for eq in p.equalities] + [box.lower for box in p.diag_boxes], dtype=float)

    violations = [float(np.real(np.sum(eq.matrix.T * X))) - eq.rhs for eq in p.equalities]
    for box in p.diag_boxes:
        x = float(X[box.index, box.index].real)
        violations.append(max(box.lower - x, 0.0, x - box.upper))
    min_eig_X = float(np.linalg.eigvalsh(X)[0])
    primal = (float(np.linalg.norm(violations)) + max(0.0, -min_eig_X)) / (1.0 + float(np.linalg.norm(b)))

    S = p.objective.copy()
    for y, eq in zip(s.eq_multipliers, p.equalities):
        S = S - y * eq.matrix
    comp = 0.0
    for (upper, lower), box in zip(s.box_multipliers, p.diag_boxes):
        S[box.index, box.index] -= lower - upper
        x = float(X[box.index, box.index].real)
        if not box.degenerate:
            comp += lower * (x - box.lower) + upper * (box.upper - x)
    min_eig_S = float(np.linalg.eigvalsh(0.5 * (S + S.conj().T))[0])
    negative_mult = sum(max(0.0, -v) for pair in s.box_multipliers for v in pair)
    dual = (max(0.0, -min_eig_S) + negative_mult) / (1.0 + float(np.linalg.norm(p.objective)))

    comp += float(np.real(np.sum(S.T * X)))
    gap = abs(comp) / (1.0 + abs(value))
    return KktResiduals(primal=primal, dual=dual, gap=gap)
