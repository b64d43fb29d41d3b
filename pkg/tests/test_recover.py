import numpy as np
import pytest

from cliqueopf_core.chordal import decompose
from cliqueopf_core.netcase import build_admittance, build_cost_matrix
from cliqueopf_core.recover import (RecoveryError, assemble_W, default_reference, linear_cost, power_injections,
                                    rank_check, recover_voltages)
from tests.conftest import make_case

PHASORS = np.array([1.0, np.exp(1j * np.pi / 6)])


class TestRankCheck:
    def test_rank_one(self):
        r = rank_check(np.outer(PHASORS, PHASORS.conj()))
        assert r.sigma1 == pytest.approx(2.0)
        assert r.ratio <= 1e-12

    def test_identity(self):
        assert rank_check(np.eye(3)).ratio == pytest.approx(1.0)

    def test_zero(self):
        assert rank_check(np.zeros((2, 2))).ratio == 0.0


class TestInjections:
    def test_matches_phasor_formula(self, ring5, rng):
        Y = build_admittance(ring5)
        v = rng.normal(size=5) + 1j * rng.normal(size=5)
        P = power_injections(np.outer(v, v.conj()), Y)
        np.testing.assert_allclose(P, np.real(v * np.conj(Y @ v)))
        M = build_cost_matrix(ring5, Y=Y)
        assert linear_cost(P, ring5.c1) == pytest.approx(np.real(np.trace(M @ np.outer(v, v.conj()))))


class TestRecoverVoltages:
    def test_two_bus(self, line2):
        W = np.outer(PHASORS, PHASORS.conj())
        sol = recover_voltages(W, line2)
        assert sol.reference == 0
        assert sol.method == "bfs"
        np.testing.assert_allclose(sol.magnitudes, [1.0, 1.0])
        np.testing.assert_allclose(sol.angles, [0.0, np.pi / 6], atol=1e-12)
        assert sol.warnings == []
        np.testing.assert_allclose(sol.outer(), W, atol=1e-12)

    def test_reference_shift(self, line2):
        sol = recover_voltages(np.outer(PHASORS, PHASORS.conj()), line2, reference=1)
        np.testing.assert_allclose(sol.angles, [-np.pi / 6, 0.0], atol=1e-12)

    def test_undefined_angle(self, line2):
        with pytest.raises(RecoveryError, match="line 0"):
            recover_voltages(np.eye(2, dtype=complex), line2)

    def test_nearly_rank_one_uses_eigenvector(self, line2):
        W = np.outer(PHASORS, PHASORS.conj()) + 1e-3 * np.eye(2)
        sol = recover_voltages(W, line2)
        assert sol.method == "eigenvector"
        assert any("relaxation-not-tight" in w for w in sol.warnings)
        np.testing.assert_allclose(sol.angles, [0.0, np.pi / 6], atol=1e-9)

    def test_far_from_rank_one_warns(self, line2):
        W = np.array([[1.0, 0.1], [0.1, 1.0]], dtype=complex)
        sol = recover_voltages(W, line2)
        assert sol.method == "bfs"
        assert "voltages do not solve" in sol.warnings[0]

    def test_cycle_inconsistency(self):
        case = make_case(3, [(1, 2, 1.0, -1.0), (2, 3, 1.0, -1.0), (1, 3, 1.0, -1.0)], [1.0, -1.0, -1.0])
        W = np.ones((3, 3), dtype=complex)
        W[0, 2], W[2, 0] = np.exp(0.5j), np.exp(-0.5j)
        sol = recover_voltages(W, case)
        assert any("cycle inconsistency" in w for w in sol.warnings)

    def test_to_dict(self, line2):
        doc = recover_voltages(np.outer(PHASORS, PHASORS.conj()), line2).to_dict()
        assert doc["reference_bus"] == 1
        assert [bus["id"] for bus in doc["buses"]] == [1, 2]
        assert set(doc["rank"]) == {"sigma1", "sigma2", "ratio"}


class TestDefaultReference:
    def test_lowest_generator(self, line2, star3):
        assert default_reference(line2) == 0
        assert default_reference(star3) == 2

    def test_no_generator(self):
        case = make_case(2, [(1, 2, 1.0, 0.0)], [-1.0, -2.0])
        assert default_reference(case) == 0


class TestAssemble:
    def test_rank_one_completion(self, star3, rng):
        d = decompose(build_cost_matrix(star3))
        v = np.exp(1j * rng.uniform(-1, 1, size=3)) * rng.uniform(0.9, 1.1, size=3)
        W = np.outer(v, v.conj())
        blocks = {l: W[np.ix_(q, q)] for l, q in enumerate(d.cliques)}
        assembled = assemble_W(d, blocks)
        assert assembled.completed and not assembled.flagged
        np.testing.assert_allclose(assembled.W, W, atol=1e-12)

    def test_conflicting_copies(self, star3):
        d = decompose(build_cost_matrix(star3))
        blocks = {0: np.array([[1.0, 0.2], [0.2, 1.0]]), 1: np.array([[1.0, 0.2], [0.2, 1.1]])}
        assembled = assemble_W(d, blocks, complete=False)
        assert assembled.W[2, 2] == pytest.approx(1.05)
        assert assembled.conflict == pytest.approx(0.05)
        assert assembled.flagged and not assembled.completed
        assert assembled.W[0, 1] == 0

    def test_shared_values_win(self, star3):
        d = decompose(build_cost_matrix(star3))
        blocks = {0: np.eye(2), 1: np.eye(2)}
        assert assemble_W(d, blocks, {(2, 2): 1.07}, complete=False).W[2, 2] == pytest.approx(1.07)

    def test_missing_block(self, star3):
        d = decompose(build_cost_matrix(star3))
        with pytest.raises(ValueError, match="clique"):
            assemble_W(d, {0: np.eye(2)})
