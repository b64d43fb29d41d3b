import numpy as np
import pytest

from cliqueopf_core.hsdp import (DiagBox, Equality, HermitianSdp, SdpStatus, SolverOptions, embed_matrix, kkt_residuals,
                                 solve, unembed_matrix)

def random_hermitian(rng, m):
    A = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    return 0.5 * (A + A.conj().T)

def random_psd(rng, m):
    A = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    return A @ A.conj().T

def random_feasible(rng, m=4, n_eq=3, boxes=True):
    """Bounded problem with a strictly feasible PSD point"""
    X0 = random_psd(rng, m) + np.eye(m)
    equalities = []
    for _ in range(n_eq):
        A = random_hermitian(rng, m)
        equalities.append(Equality(A, float(np.real(np.trace(A @ X0)))))
    diag_boxes = []
    if boxes:
        x = np.real(np.diag(X0))
        diag_boxes = [DiagBox(0, 0.5 * x[0], 2.0 * x[0]), DiagBox(m - 1, 0.5 * x[-1], 2.0 * x[-1])]
    C = random_psd(rng, m) + 0.1 * np.eye(m)
    return HermitianSdp(C, equalities, diag_boxes)

def with_rhs(p, j, delta):
    equalities = list(p.equalities)
    equalities[j] = Equality(equalities[j].matrix, equalities[j].rhs + delta)
    return HermitianSdp(p.objective, equalities, list(p.diag_boxes))

def cvxpy_value(cp, p, solver):
    X = cp.Variable((p.m, p.m), hermitian=True)
    constraints = [X >> 0]
    constraints += [cp.real(cp.trace(eq.matrix @ X)) == eq.rhs for eq in p.equalities]
    for box in p.diag_boxes:
        constraints += [cp.real(X[box.index, box.index]) >= box.lower,
                        cp.real(X[box.index, box.index]) <= box.upper]
    reference = cp.Problem(cp.Minimize(cp.real(cp.trace(p.objective @ X))), constraints)
    reference.solve(solver=solver)
    return reference.value

class TestValidation:
    def test_non_hermitian_objective(self):
        with pytest.raises(ValueError, match="not Hermitian"):
            HermitianSdp(np.array([[1, 1j], [1j, 1]]))

    def test_non_hermitian_equality(self):
        with pytest.raises(ValueError, match="equality 0"):
            HermitianSdp(np.eye(2), [Equality(np.array([[0, 1], [0, 0]]), 1.0)])

    def test_inverted_box(self):
        with pytest.raises(ValueError, match="lower 2"):
            DiagBox(0, 2.0, 1.0)

    def test_duplicate_box(self):
        with pytest.raises(ValueError, match="same diagonal"):
            HermitianSdp(np.eye(2), diag_boxes=[DiagBox(0, 0, 1), DiagBox(0, 0, 2)])

class TestEmbedding:
    def test_spectrum_doubles(self, rng):
        H = random_hermitian(rng, 3)
        np.testing.assert_allclose(np.linalg.eigvalsh(embed_matrix(H)),
                                   np.sort(np.repeat(np.linalg.eigvalsh(H), 2)), atol=1e-12)

    def test_inverse(self, rng):
        H = random_hermitian(rng, 4)
        np.testing.assert_allclose(unembed_matrix(embed_matrix(H)), H, atol=1e-15)

    def test_trace_scales(self, rng):
        A, X = random_hermitian(rng, 3), random_hermitian(rng, 3)
        assert np.trace(embed_matrix(A) @ embed_matrix(X)) == pytest.approx(2 * np.real(np.trace(A @ X)))

class TestSolve:
    def test_minimum_eigenvalue(self, rng):
        C = random_hermitian(rng, 3)
        s = solve(HermitianSdp(C, [Equality(np.eye(3), 1.0)]), tol=1e-10)
        lam = np.linalg.eigvalsh(C)[0]
        assert s.status is SdpStatus.OPTIMAL
        assert s.objective_value == pytest.approx(lam, abs=1e-7)
        assert s.eq_multipliers[0] == pytest.approx(lam, abs=1e-6)

    def test_active_upper_box(self):
        s = solve(HermitianSdp(np.array([[-1.0]]), diag_boxes=[DiagBox(0, 0.5, 2.0)]), tol=1e-10)
        assert s.status is SdpStatus.OPTIMAL
        assert s.objective_value == pytest.approx(-2.0, abs=1e-7)
        upper, lower = s.box_multipliers[0]
        assert upper == pytest.approx(1.0, abs=1e-6)
        assert lower == pytest.approx(0.0, abs=1e-6)

    def test_infeasible(self):
        p = HermitianSdp(np.eye(2), [Equality(np.eye(2), 1.0)], [DiagBox(0, 1.0, 1.0), DiagBox(1, 1.0, 2.0)])
        s = solve(p)
        assert s.status is SdpStatus.INFEASIBLE
        assert s.objective_value == np.inf

    def test_unbounded(self):
        s = solve(HermitianSdp(np.array([[-1.0]])))
        assert s.status is SdpStatus.UNBOUNDED
        assert s.objective_value == -np.inf

    def test_unconstrained_psd_objective(self):
        s = solve(HermitianSdp(np.eye(2)))
        assert s.status is SdpStatus.OPTIMAL
        assert s.objective_value == 0.0
        np.testing.assert_array_equal(s.X, np.zeros((2, 2)))

    def test_kkt(self, rng):
        for _ in range(5):
            p = random_feasible(rng)
            s = solve(p, tol=1e-9)
            assert s.status is SdpStatus.OPTIMAL
            r = kkt_residuals(p, s)
            assert r.primal <= 1e-7
            assert r.dual <= 1e-7
            assert r.gap <= 1e-7
            assert np.linalg.eigvalsh(s.X)[0] >= -1e-8
            np.testing.assert_allclose(s.X, s.X.conj().T, atol=1e-12)

    def test_multipliers_are_sensitivities(self, rng):
        delta = 1e-3
        for _ in range(3):
            p = random_feasible(rng, boxes=False)
            s = solve(p, tol=1e-10)
            for j in range(len(p.equalities)):
                up = solve(with_rhs(p, j, delta), tol=1e-10).objective_value
                down = solve(with_rhs(p, j, -delta), tol=1e-10).objective_value
                assert s.eq_multipliers[j] == pytest.approx((up - down) / (2 * delta), rel=1e-3, abs=1e-4)

    def test_debug_trace(self, rng):
        p = random_feasible(rng)
        s = solve(p, options=SolverOptions(debug=True))
        assert s.trace
        assert {"iteration", "mu", "primal", "dual", "gap"} <= set(s.trace[0])
        assert solve(p).trace is None

    def test_matches_cvxpy(self, rng):
        cp = pytest.importorskip("cvxpy")
        solver = cp.CLARABEL if "CLARABEL" in cp.installed_solvers() else cp.SCS
        for _ in range(3):
            p = random_feasible(rng)
            assert solve(p).objective_value == pytest.approx(cvxpy_value(cp, p, solver), rel=1e-4, abs=1e-4)

@pytest.mark.slow
class TestOracles:
    def test_fifty_instances_match_cvxpy(self, rng):
        cp = pytest.importorskip("cvxpy")
        solver = cp.CLARABEL if "CLARABEL" in cp.installed_solvers() else cp.SCS
        for k in range(50):
            m = 1 + k % 4
            p = random_feasible(rng, m=m, n_eq=min(m, 3), boxes=m > 1)
            s = solve(p, tol=1e-10)
            assert s.status is SdpStatus.OPTIMAL
            r = kkt_residuals(p, s)
            assert max(r.primal, r.dual, r.gap) <= 1e-8
            reference = cvxpy_value(cp, p, solver)
            assert s.objective_value == pytest.approx(reference, rel=1e-4, abs=1e-6)

    def test_twenty_multiplier_sensitivities(self, rng):
        delta = 1e-4
        for _ in range(20):
            p = random_feasible(rng, boxes=False)
            s = solve(p, tol=1e-11)
            for j in range(len(p.equalities)):
                up = solve(with_rhs(p, j, delta), tol=1e-11).objective_value
                down = solve(with_rhs(p, j, -delta), tol=1e-11).objective_value
                assert s.eq_multipliers[j] == pytest.approx((up - down) / (2 * delta), rel=1e-3, abs=1e-5)

    @pytest.mark.parametrize("gamma", [10.0, 0.1])
    def test_objective_scale_leaves_the_solution(self, rng, gamma):
        for _ in range(5):
            p = random_feasible(rng)
            base = solve(p, tol=1e-10)
            scaled = solve(HermitianSdp(gamma * p.objective, list(p.equalities), list(p.diag_boxes)), tol=1e-10)
            assert scaled.objective_value == pytest.approx(gamma * base.objective_value, rel=1e-6)
            np.testing.assert_allclose(scaled.X, base.X, atol=1e-5 * max(1.0, np.max(np.abs(base.X))))
            np.testing.assert_allclose(scaled.eq_multipliers, gamma * np.asarray(base.eq_multipliers),
                                       rtol=1e-4, atol=1e-6 * gamma)
