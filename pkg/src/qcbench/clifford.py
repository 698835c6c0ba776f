"""Canonical 1- and 2-qubit Clifford groups with native-gate decompositions.

The groups are generated by breadth-first closure over {H, S} (plus CX for
two qubits), de-duplicated by a global-phase-canonical matrix key, then
indexed in a deterministic sorted order.  Sizes are checked against the
known group orders (24 and 11520).

Decompositions target the native set ``{rx90, rz, cx}``: the identity
element becomes an idle slot, pure z-rotation elements compile to a single
virtual (zero-duration) rz, and every other one-qubit element compiles to
exactly two Rx(pi/2) pulses plus virtual Rz; two-qubit elements go through
the Cartan decomposition, giving at most three cx.  Decompositions
reproduce the group element up to global phase.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .circuit import Instruction, gate_matrix, transpile_1q, u3_angles_from_unitary

__all__ = ["CliffordGroup", "clifford_group"]

_KEY_DECIMALS = 6


def _phase_canonical_key(u: np.ndarray) -> bytes:
    flat = u.ravel()
    first = next(i for i, v in enumerate(flat) if abs(v) > 1e-3)
    phase = flat[first] / abs(flat[first])
    canon = np.round(u / phase, _KEY_DECIMALS) + 0.0  # +0.0 folds -0.0 into 0.0
    return np.ascontiguousarray(
        np.stack([canon.real, canon.imag])
    ).tobytes()


def _generators(num_qubits: int) -> list[np.ndarray]:
    h = gate_matrix("h")
    s = gate_matrix("s")
    if num_qubits == 1:
        return [h, s]
    eye = np.eye(2)
    cx01 = gate_matrix("cx")
    swap = gate_matrix("swap")
    cx10 = swap @ cx01 @ swap
    return [np.kron(h, eye), np.kron(eye, h), np.kron(s, eye), np.kron(eye, s), cx01, cx10]


_GROUP_ORDER = {1: 24, 2: 11520}


class CliffordGroup:
    """Indexed Clifford group on one or two qubits."""

    def __init__(self, num_qubits: int) -> None:
        if num_qubits not in (1, 2):
            raise ValueError("Clifford groups are tabulated for 1 or 2 qubits")
        self.num_qubits = num_qubits
        dim = 2**num_qubits
        gens = _generators(num_qubits)
        seen: dict[bytes, np.ndarray] = {}
        eye = np.eye(dim, dtype=np.complex128)
        seen[_phase_canonical_key(eye)] = eye
        frontier = [eye]
        while frontier:
            nxt = []
            for mat in frontier:
                for g in gens:
                    cand = g @ mat
                    key = _phase_canonical_key(cand)
                    if key not in seen:
                        seen[key] = cand
                        nxt.append(cand)
            frontier = nxt
        if len(seen) != _GROUP_ORDER[num_qubits]:
            raise RuntimeError(
                f"Clifford closure produced {len(seen)} elements, "
                f"expected {_GROUP_ORDER[num_qubits]}"
            )
        ordered = sorted(seen.items(), key=lambda kv: kv[0])
        self._keys = [k for k, _ in ordered]
        self._mats = [m for _, m in ordered]
        self._index = {k: i for i, k in enumerate(self._keys)}
        self._inverse = [self._index[_phase_canonical_key(m.conj().T)] for m in self._mats]
        self._decomp_cache: dict[int, tuple[Instruction, ...]] = {}

    # -- basic structure ----------------------------------------------
    @property
    def size(self) -> int:
        return len(self._mats)

    def matrix(self, index: int) -> np.ndarray:
        return self._mats[index]

    def index_of(self, matrix: np.ndarray) -> int:
        key = _phase_canonical_key(np.asarray(matrix, dtype=np.complex128))
        try:
            return self._index[key]
        except KeyError:
            raise ValueError("matrix is not an element of this Clifford group") from None

    @property
    def identity_index(self) -> int:
        return self.index_of(np.eye(2**self.num_qubits))

    def inverse(self, index: int) -> int:
        return self._inverse[index]

    def product(self, first: int, then: int) -> int:
        """Index of the element 'apply ``first``, then ``then``'."""
        return self.index_of(self._mats[then] @ self._mats[first])

    def compose(self, indices: list[int]) -> int:
        """Element equal to applying the listed elements in order."""
        acc = np.eye(2**self.num_qubits, dtype=np.complex128)
        for i in indices:
            acc = self._mats[i] @ acc
        return self.index_of(acc)

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.size))

    # -- native decompositions ----------------------------------------
    def decomposition(self, index: int) -> tuple[Instruction, ...]:
        """Native-gate realization on local qubits 0..n-1 (global phase free).

        The identity element compiles to idle slots rather than pulse pairs
        (so interleaving it costs only idle decoherence), and one-qubit
        elements that are pure z-rotations compile to a single virtual rz
        with no physical pulse.
        """
        if index not in self._decomp_cache:
            mat = self._mats[index]
            if index == self.identity_index:
                instrs = tuple(Instruction("i", (q,)) for q in range(self.num_qubits))
            elif self.num_qubits == 1:
                theta, phi, lam = u3_angles_from_unitary(mat)
                if abs(theta) < 1e-9 or abs(theta - 2 * np.pi) < 1e-9:
                    instrs = (Instruction("rz", (0,), (phi + lam,)),)
                else:
                    instrs = tuple(transpile_1q(theta, phi, lam, 0))
            else:
                from . import kak
                from .circuit import Circuit, transpile

                scratch = Circuit(2)
                for name, params, qubits in kak.decompose_2q(mat):
                    scratch.add(name, *qubits, params=params)
                instrs = tuple(transpile(scratch).instructions)
            self._decomp_cache[index] = instrs
        return self._decomp_cache[index]

    def pulse_count(self, index: int) -> int:
        """Number of physical rx90 pulses in the stored decomposition."""
        return sum(1 for i in self.decomposition(index) if i.name == "rx90")

    def cx_count(self, index: int) -> int:
        return sum(1 for i in self.decomposition(index) if i.name == "cx")


@lru_cache(maxsize=None)
def clifford_group(num_qubits: int) -> CliffordGroup:
    return CliffordGroup(num_qubits)
