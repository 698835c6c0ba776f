"""Channel/state algebra: conventions pinned by independently derived values."""

import numpy as np
import pytest

from qcbench import qmath


def bell_state():
    vec = np.zeros(4, dtype=np.complex128)
    vec[0] = vec[3] = 1.0 / np.sqrt(2.0)
    return np.outer(vec, vec.conj())


class TestPaulis:
    def test_ordering_is_lexicographic_with_qubit0_slowest(self):
        labels = qmath.pauli_labels(2)
        assert labels[:4] == ("II", "IX", "IY", "IZ")
        assert labels[4] == "XI"
        assert labels[-1] == "ZZ"

    def test_pauli_matrix_tensor_order(self):
        # Qubit 0 is the leftmost letter and the slow kron factor.
        assert np.allclose(qmath.pauli_matrix("XI"), np.kron(qmath.PAULI_X, qmath.PAULI_I))
        assert np.allclose(qmath.pauli_matrix("IZ"), np.kron(qmath.PAULI_I, qmath.PAULI_Z))

    def test_pauli_string_index_round_trip(self):
        for idx in range(16):
            ps = qmath.PauliString.from_index(idx, 2)
            assert ps.index == idx
        assert qmath.PauliString("XIZ").weight == 2

    def test_invalid_label_rejected(self):
        with pytest.raises(ValueError):
            qmath.pauli_matrix("AB")


class TestPtm:
    def test_identity_channel_ptm(self):
        ptm = qmath.ptm_from_unitary(np.eye(2))
        assert np.allclose(ptm, np.eye(4), atol=1e-12)

    def test_x_gate_ptm(self):
        # Conjugation by X: X -> X, Y -> -Y, Z -> -Z.
        ptm = qmath.ptm_from_unitary(qmath.PAULI_X)
        assert np.allclose(ptm, np.diag([1.0, 1.0, -1.0, -1.0]), atol=1e-12)

    def test_rx_rotation_ptm_closed_form(self):
        theta = 0.37
        rx = np.cos(theta / 2) * np.eye(2) - 1j * np.sin(theta / 2) * qmath.PAULI_X
        ptm = qmath.ptm_from_unitary(rx)
        expected = np.array(
            [
                [1, 0, 0, 0],
                [0, 1, 0, 0],
                [0, 0, np.cos(theta), -np.sin(theta)],
                [0, 0, np.sin(theta), np.cos(theta)],
            ]
        )
        assert np.allclose(ptm, expected, atol=1e-12)

    def test_unitary_ptm_is_orthogonal(self):
        rng = np.random.default_rng(7)
        u = qmath.haar_random_unitary(4, rng)
        ptm = qmath.ptm_from_unitary(u)
        assert np.allclose(ptm @ ptm.T, np.eye(16), atol=1e-10)

    def test_ptm_composition_matches_matrix_product(self):
        rng = np.random.default_rng(11)
        u1 = qmath.haar_random_unitary(2, rng)
        u2 = qmath.haar_random_unitary(2, rng)
        combined = qmath.ptm_from_unitary(u2 @ u1)
        assert np.allclose(qmath.ptm_from_unitary(u2) @ qmath.ptm_from_unitary(u1), combined, atol=1e-10)


class TestChoi:
    def test_identity_choi_is_maximally_entangled_state(self):
        # Frozen expectation: (|00> + |11>)(<00| + <11|) / 2.
        expected = bell_state()
        from_kraus = qmath.choi_from_kraus([np.eye(2)])
        from_ptm = qmath.choi_from_ptm(np.eye(4))
        assert np.allclose(from_kraus, expected, atol=1e-12)
        assert np.allclose(from_ptm, expected, atol=1e-12)

    def test_choi_paths_agree_on_random_channel(self):
        rng = np.random.default_rng(3)
        u = qmath.haar_random_unitary(2, rng)
        ops = [np.sqrt(0.7) * u, np.sqrt(0.3) * qmath.PAULI_Z @ u]
        direct = qmath.choi_from_kraus(ops)
        via_ptm = qmath.choi_from_ptm(qmath.ptm_from_kraus(ops))
        assert np.allclose(direct, via_ptm, atol=1e-10)

    def test_choi_is_unit_trace_density_matrix(self):
        rng = np.random.default_rng(5)
        u = qmath.haar_random_unitary(4, rng)
        choi = qmath.choi_from_kraus([u])
        qmath.validate_density_matrix(choi)


class TestFidelities:
    def test_pure_state_overlap(self):
        zero = np.diag([1.0, 0.0]).astype(complex)
        plus = 0.5 * np.array([[1, 1], [1, 1]], dtype=complex)
        assert qmath.state_fidelity(zero, plus) == pytest.approx(0.5, abs=1e-12)

    def test_mixed_state_fidelity_matches_classical_bhattacharyya(self):
        # Commuting states: F = (sum_i sqrt(p_i q_i))^2 = 0.9330127018922193.
        rho = np.diag([0.75, 0.25]).astype(complex)
        sigma = np.diag([0.5, 0.5]).astype(complex)
        expected = (np.sqrt(0.375) + np.sqrt(0.125)) ** 2
        assert qmath.state_fidelity(rho, sigma) == pytest.approx(expected, abs=1e-12)
        assert qmath.state_fidelity(rho, sigma) == pytest.approx(0.9330127018922193, abs=1e-12)

    def test_fidelity_symmetry_and_unit_self_fidelity(self):
        rng = np.random.default_rng(13)
        probs = rng.dirichlet(np.ones(4))
        u = qmath.haar_random_unitary(4, rng)
        rho = u @ np.diag(probs).astype(complex) @ u.conj().T
        assert qmath.state_fidelity(rho, rho) == pytest.approx(1.0, abs=1e-9)

    def test_process_fidelity_unitary_self(self):
        rng = np.random.default_rng(17)
        u = qmath.haar_random_unitary(2, rng)
        ptm = qmath.ptm_from_unitary(u)
        assert qmath.process_fidelity(ptm, ptm) == pytest.approx(1.0, abs=1e-12)

    def test_depolarizing_process_fidelity_identities(self):
        # F_pro(depol gamma vs identity): 1 - 3 gamma / 4 (1q), 1 - 15 gamma / 16 (2q).
        for gamma in (0.0, 1e-3, 0.05, 0.3):
            ops1 = [np.sqrt(1 - 3 * gamma / 4) * np.eye(2)] + [
                np.sqrt(gamma / 4) * p for p in (qmath.PAULI_X, qmath.PAULI_Y, qmath.PAULI_Z)
            ]
            f1 = qmath.process_fidelity(qmath.ptm_from_kraus(ops1), np.eye(4))
            assert f1 == pytest.approx(1 - 3 * gamma / 4, abs=1e-12)
            assert qmath.depolarizing_ptm_fidelity(gamma, 1) == pytest.approx(1 - 3 * gamma / 4, abs=1e-15)
            assert qmath.depolarizing_ptm_fidelity(gamma, 2) == pytest.approx(1 - 15 * gamma / 16, abs=1e-15)

    def test_process_fidelity_nonunitary_target_uses_choi_route(self):
        # Fully depolarizing vs identity: Choi fidelity = <Omega| I/4 |Omega> = 1/4.
        gamma = 1.0
        ops = [np.sqrt(1 - 3 * gamma / 4) * np.eye(2)] + [
            np.sqrt(gamma / 4) * p for p in (qmath.PAULI_X, qmath.PAULI_Y, qmath.PAULI_Z)
        ]
        ptm = qmath.ptm_from_kraus(ops)
        assert qmath.process_fidelity(np.eye(4), ptm) == pytest.approx(0.25, abs=1e-9)


class TestKrausChannel:
    def test_trace_preserving_check(self):
        chan = qmath.KrausChannel.from_unitary(qmath.PAULI_X)
        assert chan.completeness_defect() < 1e-15
        bad = qmath.KrausChannel((0.5 * np.eye(2),))
        assert not bad.is_trace_preserving()

    def test_compose_and_tensor(self):
        x = qmath.KrausChannel.from_unitary(qmath.PAULI_X)
        z = qmath.KrausChannel.from_unitary(qmath.PAULI_Z)
        composed = x.compose(z)
        rho = np.diag([1.0, 0.0]).astype(complex)
        assert np.allclose(composed.apply(rho), (qmath.PAULI_X @ qmath.PAULI_Z) @ rho @ (qmath.PAULI_X @ qmath.PAULI_Z).conj().T)
        pair = x.tensor(z)
        assert pair.dim == 4 and pair.num_qubits == 2


class TestUtilities:
    def test_partial_trace_bell_state(self):
        reduced = qmath.partial_trace(bell_state(), [2, 2], [0])
        assert np.allclose(reduced, np.eye(2) / 2, atol=1e-12)

    def test_partial_trace_product_state(self):
        a = np.diag([0.25, 0.75]).astype(complex)
        b = np.diag([0.9, 0.1]).astype(complex)
        out = qmath.partial_trace(np.kron(a, b), [2, 2], [1])
        assert np.allclose(out, b, atol=1e-12)

    def test_trace_norm_of_traceless_difference(self):
        diff = np.diag([0.5, -0.5]).astype(complex)
        assert qmath.trace_norm(diff) == pytest.approx(1.0, abs=1e-12)

    def test_psd_sqrt_round_trip_and_rejection(self):
        rng = np.random.default_rng(23)
        m = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        psd = m @ m.conj().T
        root = qmath.psd_sqrt(psd)
        assert np.allclose(root @ root, psd, atol=1e-9)
        with pytest.raises(ValueError):
            qmath.psd_sqrt(np.diag([1.0, -0.5]))

    def test_haar_unitary_is_unitary_and_phase_invariant_stats(self):
        rng = np.random.default_rng(29)
        mean_abs00 = 0.0
        n = 400
        for _ in range(n):
            u = qmath.haar_random_unitary(2, rng)
            assert qmath.is_unitary(u)
            mean_abs00 += abs(u[0, 0]) ** 2 / n
        # E[|U_00|^2] = 1/d for Haar measure.
        assert mean_abs00 == pytest.approx(0.5, abs=0.05)

    def test_validate_density_matrix_rejects_bad_input(self):
        with pytest.raises(ValueError):
            qmath.validate_density_matrix(np.diag([0.7, 0.7]))
        with pytest.raises(ValueError):
            qmath.validate_density_matrix(np.array([[0.5, 0.5], [0.2, 0.5]]))
