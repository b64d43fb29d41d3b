"""Outer gradient loop for quadratic generation costs.

With P_i = Tr(A_i W) the quadratic cost c2 P^2 + c1 P is the max over z of
(c1 - 2 sqrt(c2) z) P - z^2, so the quadratic problem is max_z J(z) where J(z) is the
linear-cost relaxation with shifted costs, minus sum z^2. J is concave and its gradient
is -2 sqrt(c2) P(W*) - 2 z.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from cliqueopf_core.netcase import PowerCase, build_admittance
from cliqueopf_core.recover import TIGHT_RATIO, power_injections, rank_check

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuadraticCostSpec:
    """
    Attributes
    ----------
    c1 -- linear cost coefficients
    c2 -- quadratic cost coefficients, all >= 0
    Y -- admittance matrix the injection matrices A_i are built from
    """
    c1: np.ndarray
    c2: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.c2) < 0):
            bad = int(np.flatnonzero(np.asarray(self.c2) < 0)[0])
            raise ValueError(f"c2 of bus {bad + 1} is negative ({self.c2[bad]})")
        if len(self.c1) != len(self.c2) or self.Y.shape != (len(self.c1), len(self.c1)):
            raise ValueError("c1, c2 and Y sizes disagree")

    @classmethod
    def from_case(cls, case: PowerCase) -> "QuadraticCostSpec":
        return cls(c1=case.c1, c2=case.c2, Y=build_admittance(case))

    @property
    def n(self) -> int:
        return len(self.c1)

    def injection_matrix(self, i: int) -> np.ndarray:
        """A_i = (Y^H E_i + E_i Y) / 2"""
        E = np.zeros((self.n, self.n))
        E[i, i] = 1.0
        return 0.5 * (self.Y.conj().T @ E + E @ self.Y)

    def injections(self, W: np.ndarray) -> np.ndarray:
        """Tr(A_i W) for every bus, which is the real injection P_i"""
        return power_injections(W, self.Y)

    def objective(self, W: np.ndarray) -> float:
        P = self.injections(W)
        return float(np.sum(self.c2 * P ** 2 + self.c1 * P))


def shifted_costs(spec: QuadraticCostSpec, z: np.ndarray) -> np.ndarray:
    return spec.c1 - 2.0 * np.sqrt(spec.c2) * np.asarray(z, dtype=float)


def j_value(spec: QuadraticCostSpec, z: np.ndarray, Wstar: np.ndarray) -> float:
    """J(z) = Tr(M(z) W*) - sum z^2 with M(z) the cost matrix of the shifted costs"""
    z = np.asarray(z, dtype=float)
    return float(np.dot(shifted_costs(spec, z), spec.injections(Wstar)) - np.dot(z, z))


def grad_J(spec: QuadraticCostSpec, z: np.ndarray, Wstar: np.ndarray) -> np.ndarray:
    return -2.0 * np.sqrt(spec.c2) * spec.injections(Wstar) - 2.0 * np.asarray(z, dtype=float)


@dataclass
class InnerResult:
    """What an inner linear-cost solve hands back to the outer loop"""
    W: np.ndarray
    converged: bool
    report: Optional[object] = None


@dataclass
class ZIterate:
    z: np.ndarray
    value: float
    gradient: np.ndarray
    W: np.ndarray
    degenerate: bool = False
    inner: Optional[InnerResult] = None

    @property
    def grad_norm(self) -> float:
        return float(np.max(np.abs(self.gradient))) if self.gradient.size else 0.0


@dataclass
class OuterResult:
    iterate: Optional[ZIterate]
    converged: bool
    iterations: int
    objective: float
    aborted: bool = False
    trace: List[dict] = field(default_factory=list)


def _evaluate(spec: QuadraticCostSpec, inner: Callable[[np.ndarray], InnerResult], z: np.ndarray) -> Optional[ZIterate]:
    result = inner(shifted_costs(spec, z))
    if not result.converged:
        return None
    degenerate = rank_check(result.W).ratio > TIGHT_RATIO
    if degenerate:
        logger.debug(f"[ Dbg ] inner optimum at z={np.round(z, 6).tolist()} is not rank one; gradient may be a supergradient")
    return ZIterate(z=np.array(z, dtype=float), value=j_value(spec, z, result.W), gradient=grad_J(spec, z, result.W),
                    W=result.W, degenerate=degenerate, inner=result)


def _trace_entry(k: int, it: ZIterate, step: float) -> dict:
    return {"outer": k, "z": it.z.tolist(), "J": it.value, "grad_inf": it.grad_norm, "step": step,
            "degenerate": it.degenerate}


def outer_loop(spec: QuadraticCostSpec, inner: Callable[[np.ndarray], InnerResult], tol_z: float = 1e-4,
               max_outer: int = 300, z0: Optional[np.ndarray] = None, secant_offset: float = 1e-2,
               step_factor: float = 0.1, max_halvings: int = 30) -> OuterResult:
    """ Gradient ascent of J(z).

        The step is step_factor/L with L >= 2 the secant slope of the gradient between z0 and
        z0 + secant_offset along the gradient; a step that does not increase J is halved until
        it does. Stops when ||g||_inf <= tol_z or after max_outer iterations. An inner solve
        that fails to converge aborts the loop and the last accepted iterate is returned.

        Keyword arguments:
        spec -- QuadraticCostSpec
        inner -- linear costs -> InnerResult; it may keep warm-start state between calls
        tol_z -- gradient tolerance
        max_outer -- outer iteration cap
        secant_offset -- distance of the second gradient evaluation that estimates L
        step_factor -- fraction of 1/L taken as the step
        z0 -- starting point, zero by default

        Returns:
        result -- OuterResult with the quadratic objective of the final W*
    """
    z = np.zeros(spec.n) if z0 is None else np.asarray(z0, dtype=float)
    current = _evaluate(spec, inner, z)
    if current is None:
        logger.warning("[ ! ] inner solve did not converge at the starting point")
        return OuterResult(iterate=None, converged=False, iterations=0, objective=float("nan"), aborted=True)
    trace = [_trace_entry(0, current, 0.0)]

    lipschitz = 2.0
    if current.grad_norm > tol_z:
        direction = current.gradient / np.linalg.norm(current.gradient)
        shifted = _evaluate(spec, inner, current.z + secant_offset * direction)
        if shifted is not None:
            lipschitz = max(2.0, float(np.linalg.norm(shifted.gradient - current.gradient)) / secant_offset)

    k = 0
    while current.grad_norm > tol_z and k < max_outer:
        k += 1
        step = step_factor / lipschitz
        accepted = None
        for _ in range(max_halvings):
            candidate = _evaluate(spec, inner, current.z + step * current.gradient)
            if candidate is None:
                logger.warning(f"[ ! ] inner solve did not converge in outer iteration {k}; aborting")
                return OuterResult(iterate=current, converged=False, iterations=k,
                                   objective=spec.objective(current.W), aborted=True, trace=trace)
            if candidate.value >= current.value - 1e-12 * max(1.0, abs(current.value)):
                accepted = candidate
                break
            step *= 0.5
        if accepted is None:
            logger.debug(f"[ Dbg ] no ascent step found in outer iteration {k}")
            break
        current = accepted
        trace.append(_trace_entry(k, current, step))
        logger.debug(f"[ Dbg ] outer {k}: J={current.value:.8g} |g|={current.grad_norm:.3e}")

    converged = current.grad_norm <= tol_z
    if not converged:
        logger.warning(f"[ ! ] outer loop stopped after {k} iterations with |g|_inf={current.grad_norm:.3e}")
    return OuterResult(iterate=current, converged=converged, iterations=k, objective=spec.objective(current.W),
                       trace=trace)
