"""Cartan decomposition and two-qubit compilation."""

import numpy as np
import pytest

from qcbench.circuit import Circuit, gate_matrix, transpile
from qcbench.kak import canonical_gate, decompose_2q, kak_decompose
from qcbench.qmath import haar_random_unitary
from qcbench.randomness import make_rng


def steps_to_unitary(steps):
    c = Circuit(2)
    for name, params, qubits in steps:
        c.add(name, *qubits, params=params)
    return c.unitary()


def phase_align(target, candidate):
    idx = np.unravel_index(int(np.argmax(np.abs(target))), target.shape)
    ph = target[idx] / candidate[idx]
    return candidate * (ph / abs(ph))


def assert_equiv(target, candidate, tol=1e-9):
    np.testing.assert_allclose(phase_align(target, candidate), target, atol=tol, rtol=0)


def cx_count(steps):
    return sum(1 for name, _, _ in steps if name == "cx")


class TestCanonicalGate:
    def test_zero_coords_is_identity(self):
        np.testing.assert_allclose(canonical_gate((0, 0, 0)), np.eye(4), atol=1e-12)

    def test_zz_only_matches_rzz(self):
        # exp(i c ZZ) = rzz(-2c)
        c = 0.3
        np.testing.assert_allclose(
            canonical_gate((0, 0, c)), gate_matrix("rzz", (-2 * c,)), atol=1e-12
        )


class TestKakDecompose:
    def test_rebuild_haar(self):
        rng = make_rng(17, "kak-haar")
        for _ in range(100):
            u = haar_random_unitary(4, rng)
            dec = kak_decompose(u)
            np.testing.assert_allclose(dec.rebuild(), u, atol=1e-8)

    def test_coords_in_chamber(self):
        rng = make_rng(18, "kak-chamber")
        for _ in range(100):
            c = kak_decompose(haar_random_unitary(4, rng)).coords
            assert c[0] <= np.pi / 4 + 1e-9
            assert c[0] >= c[1] >= abs(c[2]) - 1e-9
            assert c[1] >= -1e-9

    def test_known_gate_coords(self):
        np.testing.assert_allclose(
            kak_decompose(gate_matrix("cx")).coords, [np.pi / 4, 0, 0], atol=1e-9
        )
        np.testing.assert_allclose(
            np.abs(kak_decompose(gate_matrix("swap")).coords),
            [np.pi / 4, np.pi / 4, np.pi / 4],
            atol=1e-9,
        )
        np.testing.assert_allclose(
            kak_decompose(gate_matrix("rxxyy", (0.8,))).coords,
            [0.2, 0.2, 0],
            atol=1e-9,
        )

    def test_local_factors_are_unitary(self):
        rng = make_rng(19, "kak-locals")
        u = haar_random_unitary(4, rng)
        dec = kak_decompose(u)
        for m in (dec.a1, dec.a2, dec.b1, dec.b2):
            np.testing.assert_allclose(m @ m.conj().T, np.eye(2), atol=1e-9)

    def test_rejects_non_unitary(self):
        with pytest.raises(ValueError):
            kak_decompose(np.ones((4, 4)))


class TestDecompose2q:
    def test_haar_rebuild_and_three_cx(self):
        rng = make_rng(20, "dec2q-haar")
        for _ in range(200):
            u = haar_random_unitary(4, rng)
            steps = decompose_2q(u)
            assert cx_count(steps) == 3
            assert_equiv(u, steps_to_unitary(steps), tol=1e-8)

    def test_chamber_sweep_rebuild(self):
        rng = make_rng(21, "dec2q-chamber")
        for _ in range(100):
            cx_ = rng.uniform(0, np.pi / 4)
            cy_ = rng.uniform(0, cx_)
            cz_ = rng.uniform(-cy_, cy_)
            n = canonical_gate((cx_, cy_, cz_))
            steps = decompose_2q(n)
            assert cx_count(steps) <= 3
            assert_equiv(n, steps_to_unitary(steps), tol=1e-8)

    @pytest.mark.parametrize(
        "name,params,expected_cx",
        [
            ("cx", (), 1),
            ("cz", (), 1),
            ("swap", (), 3),
            ("fswap", (), 2),  # fswap is in the iswap class: coords (pi/4, pi/4, 0)
            ("rxxyy", (1.1,), 2),
            ("rzz", (0.7,), 2),
            ("cp", (0.9,), 2),
        ],
    )
    def test_structured_gates(self, name, params, expected_cx):
        u = gate_matrix(name, params)
        steps = decompose_2q(u)
        assert cx_count(steps) == expected_cx
        assert_equiv(u, steps_to_unitary(steps), tol=1e-8)

    def test_chamber_seam_negative_cz(self):
        # On the cx = pi/4 face the classes (pi/4, cy, -cz) and (pi/4, cy, cz)
        # coincide; both signs must canonicalize identically and compile.
        for cy_, cz_ in [(np.pi / 4, -np.pi / 4), (np.pi / 8, -np.pi / 8), (0.3, -0.2)]:
            n = canonical_gate((np.pi / 4, cy_, cz_))
            mirror = canonical_gate((np.pi / 4, cy_, -cz_))
            assert np.allclose(kak_decompose(n).coords, kak_decompose(mirror).coords)
            steps = decompose_2q(n)
            assert cx_count(steps) <= 3
            assert_equiv(n, steps_to_unitary(steps), tol=1e-8)

    def test_local_unitaries_need_no_cx(self):
        rng = make_rng(22, "dec2q-local")
        u = np.kron(haar_random_unitary(2, rng), haar_random_unitary(2, rng))
        steps = decompose_2q(u)
        assert cx_count(steps) == 0
        assert len(steps) == 2
        assert_equiv(u, steps_to_unitary(steps), tol=1e-8)

    def test_identity(self):
        steps = decompose_2q(np.eye(4))
        assert cx_count(steps) == 0
        assert_equiv(np.eye(4), steps_to_unitary(steps), tol=1e-10)

    def test_transpiled_steps_stay_equivalent(self):
        rng = make_rng(23, "dec2q-transpile")
        u = haar_random_unitary(4, rng)
        c = Circuit(2)
        for name, params, qubits in decompose_2q(u):
            c.add(name, *qubits, params=params)
        native = transpile(c)
        assert {i.name for i in native.instructions} <= {"i", "rx90", "rz", "cx"}
        assert_equiv(u, native.unitary(), tol=1e-8)
