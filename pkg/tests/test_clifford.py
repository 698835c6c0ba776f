"""Tests for the tabulated Clifford groups and their native decompositions."""

import numpy as np
import pytest

from qcbench.circuit import Circuit, gate_matrix
from qcbench.clifford import CliffordGroup, clifford_group


def steps_unitary(instrs, nq):
    c = Circuit(nq)
    for i in instrs:
        c.append(i)
    return c.unitary()


def phase_aligned_error(u, v):
    k = np.unravel_index(np.argmax(np.abs(v)), v.shape)
    phase = u[k] / v[k]
    return float(np.abs(u - phase * v).max())


class TestGroupStructure:
    def test_sizes(self):
        assert clifford_group(1).size == 24
        assert clifford_group(2).size == 11520

    def test_invalid_qubit_count(self):
        with pytest.raises(ValueError):
            CliffordGroup(3)

    def test_one_qubit_closure_exhaustive(self):
        g = clifford_group(1)
        for a in range(g.size):
            assert g.product(a, g.inverse(a)) == g.identity_index
            for b in range(g.size):
                idx = g.product(a, b)  # raises if the product left the group
                assert 0 <= idx < g.size

    def test_two_qubit_closure_spot_check(self):
        g = clifford_group(2)
        rng = np.random.default_rng(17)
        for _ in range(10_000):
            a, b = (int(v) for v in rng.integers(g.size, size=2))
            assert 0 <= g.product(a, b) < g.size
        for _ in range(200):
            a = int(rng.integers(g.size))
            assert g.product(a, g.inverse(a)) == g.identity_index

    def test_contains_standard_gates(self):
        g1 = clifford_group(1)
        for name in ("h", "s", "x", "y", "z", "sdg"):
            g1.index_of(gate_matrix(name))
        g2 = clifford_group(2)
        for name in ("cx", "cz", "swap"):
            g2.index_of(gate_matrix(name))

    def test_index_of_rejects_non_elements(self):
        g = clifford_group(1)
        with pytest.raises(ValueError):
            g.index_of(gate_matrix("t"))

    def test_deterministic_ordering(self):
        fresh = CliffordGroup(1)
        cached = clifford_group(1)
        for i in range(24):
            np.testing.assert_array_equal(fresh.matrix(i), cached.matrix(i))

    def test_compose_sequences_and_invert(self):
        g = clifford_group(1)
        rng = np.random.default_rng(3)
        for _ in range(50):
            seq = [g.sample(rng) for _ in range(8)]
            total = g.compose(seq)
            assert g.compose(seq + [g.inverse(total)]) == g.identity_index


class TestDecompositions:
    def test_one_qubit_matches_matrix(self):
        g = clifford_group(1)
        for i in range(g.size):
            u = steps_unitary(g.decomposition(i), 1)
            assert phase_aligned_error(u, g.matrix(i)) < 1e-10

    def test_one_qubit_pulse_budget(self):
        g = clifford_group(1)
        ident = g.identity_index
        assert g.pulse_count(ident) == 0
        assert [ins.name for ins in g.decomposition(ident)] == ["i"]
        histogram = {0: 0, 2: 0}
        for i in range(g.size):
            if i == ident:
                continue
            n = g.pulse_count(i)
            assert n in (0, 2)
            histogram[n] += 1
            if n == 0:
                # virtual z-rotation: a single zero-duration rz
                assert [ins.name for ins in g.decomposition(i)] == ["rz"]
        # exactly the three non-trivial pure z-rotations are pulse-free
        assert histogram == {0: 3, 2: 20}

    def test_identity_two_qubit_idles_both(self):
        g = clifford_group(2)
        decomp = g.decomposition(g.identity_index)
        assert [ins.name for ins in decomp] == ["i", "i"]
        assert {ins.qubits for ins in decomp} == {(0,), (1,)}

    def test_two_qubit_matches_matrix(self):
        g = clifford_group(2)
        rng = np.random.default_rng(23)
        for idx in rng.integers(g.size, size=100):
            i = int(idx)
            u = steps_unitary(g.decomposition(i), 2)
            assert phase_aligned_error(u, g.matrix(i)) < 1e-10
            assert g.cx_count(i) <= 3

    def test_native_names_only(self):
        g2 = clifford_group(2)
        rng = np.random.default_rng(5)
        for idx in rng.integers(g2.size, size=20):
            names = {ins.name for ins in g2.decomposition(int(idx))}
            assert names <= {"rx90", "rz", "cx"}
