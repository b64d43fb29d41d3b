from dataclasses import replace

import numpy as np
import pytest
from scipy.optimize import minimize

from cliqueopf_core.netcase import PowerCase, build_admittance, generate_radial
from cliqueopf_core.quadcost import (InnerResult, QuadraticCostSpec, grad_J, j_value, outer_loop, shifted_costs)
from cliqueopf_core.runner import RunConfig, solve_centralized, solve_quadratic
from tests.conftest import make_case


def with_c2(case, c2):
    buses = [replace(bus, c2=float(c)) for bus, c in zip(case.buses, c2)]
    return PowerCase(buses=buses, lines=case.lines)


def quad2():
    """2-bus case whose quadratic optimum sits on the rank-one boundary"""
    return make_case(2, [(1, 2, 2.0, -5.0)], [2.0, -5.0], c2=[1.0, 0.0])


def brute_force(case):
    spec = QuadraticCostSpec.from_case(case)

    def cost(x):
        v = np.array([x[0], x[1] * np.exp(-1j * x[2])])
        return spec.objective(np.outer(v, v.conj()))

    bounds = [(b.v_min, b.v_max) for b in case.buses] + [(-np.pi, np.pi)]
    best = np.inf
    for theta in np.linspace(-np.pi, np.pi, 13):
        for v1 in (case.buses[0].v_min, 1.0, case.buses[0].v_max):
            for v2 in (case.buses[1].v_min, 1.0, case.buses[1].v_max):
                res = minimize(cost, [v1, v2, theta], method="L-BFGS-B", bounds=bounds)
                best = min(best, res.fun)
    return best


def centralized_inner(case, tol=1e-10):
    config = RunConfig(solver_tol=tol)

    def inner(costs):
        report = solve_centralized(case, config, costs)
        return InnerResult(W=report.W, converged=report.converged, report=report)
    return inner


class TestQuadraticCostSpec:
    def test_negative_c2(self, line2):
        with pytest.raises(ValueError, match="bus 2"):
            QuadraticCostSpec(c1=np.zeros(2), c2=np.array([1.0, -0.5]), Y=build_admittance(line2))

    def test_injection_matrices(self, ring5, rng):
        spec = QuadraticCostSpec.from_case(ring5)
        Y = spec.Y
        total = sum(spec.injection_matrix(i) for i in range(spec.n))
        np.testing.assert_allclose(total, 0.5 * (Y.conj().T + Y), atol=1e-15)
        v = rng.normal(size=5) + 1j * rng.normal(size=5)
        W = np.outer(v, v.conj())
        P = np.real(v * np.conj(Y @ v))
        for i in range(spec.n):
            A = spec.injection_matrix(i)
            np.testing.assert_allclose(A, A.conj().T, atol=1e-15)
            assert np.real(np.trace(A @ W)) == pytest.approx(P[i])
        np.testing.assert_allclose(spec.injections(W), P)

    def test_shifted_costs(self):
        spec = QuadraticCostSpec(c1=np.array([1.0, 2.0]), c2=np.array([4.0, 0.0]), Y=np.eye(2, dtype=complex))
        np.testing.assert_allclose(shifted_costs(spec, [0.5, 3.0]), [-1.0, 2.0])

    def test_value_and_gradient(self):
        spec = QuadraticCostSpec(c1=np.array([1.0, 2.0]), c2=np.array([4.0, 1.0]), Y=np.eye(2, dtype=complex))
        W = np.diag([2.0, 3.0]).astype(complex)
        z = np.array([0.5, -1.0])
        assert j_value(spec, z, W) == pytest.approx((1 - 2) * 2 + (2 + 2) * 3 - 1.25)
        np.testing.assert_allclose(grad_J(spec, z, W), [-2 * 2 * 2 - 1, -2 * 1 * 3 + 2])


class TestOuterLoop:
    @pytest.fixture
    def fixed_inner(self):
        spec = QuadraticCostSpec(c1=np.array([1.0, -1.0]), c2=np.array([2.0, 0.5]), Y=np.array([[1, -1], [-1, 1]],
                                                                                              dtype=complex))
        v = np.array([1.0, 0.9])
        W = np.outer(v, v)
        return spec, W, lambda costs: InnerResult(W=W, converged=True)

    def test_full_step_on_a_fixed_inner_converges_in_one_step(self, fixed_inner):
        spec, W, inner = fixed_inner
        outer = outer_loop(spec, inner, step_factor=1.0)
        P = spec.injections(W)
        assert outer.converged and outer.iterations == 1
        np.testing.assert_allclose(outer.iterate.z, -np.sqrt(spec.c2) * P, atol=1e-12)
        assert outer.objective == pytest.approx(spec.objective(W))
        assert [entry["outer"] for entry in outer.trace] == [0, 1]
        assert outer.trace[1]["step"] == pytest.approx(0.5)

    def test_default_step_is_a_tenth_of_the_inverse_curvature(self, fixed_inner):
        spec, W, inner = fixed_inner
        outer = outer_loop(spec, inner)
        assert outer.converged
        assert all(entry["step"] == pytest.approx(0.05) for entry in outer.trace[1:])
        # the error contracts by 0.9 per step from |g|_inf = 2 sqrt(2) * 0.1
        assert outer.iterations == 76
        np.testing.assert_allclose(outer.iterate.z, -np.sqrt(spec.c2) * spec.injections(W), atol=1e-4)

    def test_iteration_cap(self, fixed_inner):
        spec, W, inner = fixed_inner
        outer = outer_loop(spec, inner, max_outer=5)
        assert not outer.converged and not outer.aborted and outer.iterations == 5

    def test_inner_failure_aborts(self):
        spec = QuadraticCostSpec(c1=np.ones(2), c2=np.ones(2), Y=np.eye(2, dtype=complex))
        outer = outer_loop(spec, lambda costs: InnerResult(W=np.eye(2), converged=False))
        assert outer.aborted and outer.iterate is None and not outer.converged

    def test_zero_c2_needs_no_outer_step(self, star3):
        outer = outer_loop(QuadraticCostSpec.from_case(star3), centralized_inner(star3))
        assert outer.converged and outer.iterations == 0
        assert outer.objective == pytest.approx(solve_centralized(star3).objective, abs=1e-6)

    def test_gradient_matches_finite_differences(self, rng):
        delta = 1e-3
        for seed in range(5):
            case = with_c2(generate_radial(3, seed, tree=True), rng.uniform(0.5, 2.0, size=3))
            spec = QuadraticCostSpec.from_case(case)
            inner = centralized_inner(case)
            z = rng.uniform(-1.0, 1.0, size=3)

            def J(point):
                return j_value(spec, point, inner(shifted_costs(spec, point)).W)

            g = grad_J(spec, z, inner(shifted_costs(spec, z)).W)
            fd = np.array([(J(z + delta * e) - J(z - delta * e)) / (2 * delta) for e in np.eye(3)])
            np.testing.assert_allclose(g, fd, rtol=1e-3, atol=1e-3 * max(1.0, np.max(np.abs(g))))


class TestQuadraticSolve:
    def test_two_bus_matches_brute_force(self):
        case = quad2()
        report = solve_quadratic(case, RunConfig(solver_tol=1e-10))
        assert report.converged
        assert report.quadratic_objective == pytest.approx(brute_force(case), rel=1e-3, abs=1e-4)
        assert report.outer[0]["outer"] == 0

    def test_decomposed_single_clique(self):
        case = quad2()
        central = solve_quadratic(case, RunConfig())
        decomposed = solve_quadratic(case, RunConfig(mode="cumulative-dual"))
        assert decomposed.converged
        assert decomposed.quadratic_objective == pytest.approx(central.quadratic_objective, rel=1e-5, abs=1e-6)

    def test_zero_c2_reduces_to_linear(self, ring5):
        report = solve_quadratic(ring5, RunConfig())
        assert report.quadratic_objective == pytest.approx(solve_centralized(ring5).objective, rel=1e-6, abs=1e-8)
        assert len(report.outer) == 1
