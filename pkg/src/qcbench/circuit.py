"""Circuit representation, gate matrices, transpilation and routing.

The native gate set is ``{i, rx90, rz(theta), cx}`` plus the non-unitary
``measure``/``reset`` and the scheduling ``barrier``.  A library of named
extended gates (``h``, ``s``, ``cz``, ``swap``, ``rzz``, ...) and a raw
``unitary`` instruction (a zero-duration, noise-free modelling construct)
are lowered to the native set by :func:`transpile`.

Every single-qubit unitary ``U(theta, phi, lam)`` with matrix

    [[cos(theta/2),                -e^{i lam} sin(theta/2)],
     [e^{i phi} sin(theta/2),  e^{i(phi+lam)} cos(theta/2)]]

is realised (up to global phase) by the uniform two-pulse sequence

    Rz(lam - pi) -> Rx(pi/2) -> Rz(pi - theta) -> Rx(pi/2) -> Rz(phi)

so every transpiled 1-qubit gate costs exactly two physical pulses and the
``Rz`` frame changes are virtual.

Plain-text circuit format (one instruction per line, ``#`` comments)::

    qubits 3
    h 0
    rz 1.5707963267948966 1
    cx 0 1
    barrier
    measure 0 -> 0

Gate lines list parameters (floats) before qubit indices (ints); ``measure
q -> c`` records outcome of qubit ``q`` into classical bit ``c``.  The raw
``unitary`` instruction has no text form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "NATIVE_GATE_ARITY",
    "EXTENDED_GATE_ARITY",
    "Instruction",
    "Circuit",
    "gate_matrix",
    "embed_unitary",
    "u3_angles_from_unitary",
    "transpile_1q",
    "transpile",
    "route",
]

# name -> (number of qubits, number of float parameters)
NATIVE_GATE_ARITY: dict[str, tuple[int, int]] = {
    "i": (1, 0),
    "rx90": (1, 0),
    "rz": (1, 1),
    "cx": (2, 0),
}

EXTENDED_GATE_ARITY: dict[str, tuple[int, int]] = {
    "x": (1, 0),
    "y": (1, 0),
    "z": (1, 0),
    "h": (1, 0),
    "s": (1, 0),
    "sdg": (1, 0),
    "t": (1, 0),
    "tdg": (1, 0),
    "rx": (1, 1),
    "ry": (1, 1),
    "u3": (1, 3),
    "cz": (2, 0),
    "swap": (2, 0),
    "cp": (2, 1),
    "rzz": (2, 1),
    "rxxyy": (2, 1),
    "fswap": (2, 0),
}

_GATE_ARITY = {**NATIVE_GATE_ARITY, **EXTENDED_GATE_ARITY}

_SQ2 = 1.0 / np.sqrt(2.0)


def gate_matrix(name: str, params: Sequence[float] = ()) -> np.ndarray:
    """Unitary matrix of a named gate (first listed qubit = slow factor)."""
    p = tuple(float(v) for v in params)
    if name in _GATE_ARITY:
        expected_params = _GATE_ARITY[name][1]
        if len(p) != expected_params:
            raise ValueError(f"gate {name!r} expects {expected_params} parameter(s), got {len(p)}")
    if name == "i":
        return np.eye(2, dtype=np.complex128)
    if name == "rx90":
        return np.array([[_SQ2, -1j * _SQ2], [-1j * _SQ2, _SQ2]], dtype=np.complex128)
    if name == "rz":
        (theta,) = p
        return np.array([[np.exp(-0.5j * theta), 0.0], [0.0, np.exp(0.5j * theta)]], dtype=np.complex128)
    if name == "rx":
        (theta,) = p
        c, s = np.cos(theta / 2), np.sin(theta / 2)
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)
    if name == "ry":
        (theta,) = p
        c, s = np.cos(theta / 2), np.sin(theta / 2)
        return np.array([[c, -s], [s, c]], dtype=np.complex128)
    if name == "x":
        return np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
    if name == "y":
        return np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=np.complex128)
    if name == "z":
        return np.diag([1.0, -1.0]).astype(np.complex128)
    if name == "h":
        return np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=np.complex128)
    if name == "s":
        return np.diag([1.0, 1.0j]).astype(np.complex128)
    if name == "sdg":
        return np.diag([1.0, -1.0j]).astype(np.complex128)
    if name == "t":
        return np.diag([1.0, np.exp(0.25j * np.pi)]).astype(np.complex128)
    if name == "tdg":
        return np.diag([1.0, np.exp(-0.25j * np.pi)]).astype(np.complex128)
    if name == "u3":
        theta, phi, lam = p
        c, s = np.cos(theta / 2), np.sin(theta / 2)
        return np.array(
            [
                [c, -np.exp(1j * lam) * s],
                [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
            ],
            dtype=np.complex128,
        )
    if name == "cx":
        return np.array(
            [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128
        )
    if name == "cz":
        return np.diag([1.0, 1.0, 1.0, -1.0]).astype(np.complex128)
    if name == "cp":
        (lam,) = p
        return np.diag([1.0, 1.0, 1.0, np.exp(1j * lam)]).astype(np.complex128)
    if name == "swap":
        return np.array(
            [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128
        )
    if name == "fswap":
        return np.array(
            [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, -1]], dtype=np.complex128
        )
    if name == "rzz":
        (theta,) = p
        a = np.exp(-0.5j * theta)
        b = np.exp(0.5j * theta)
        return np.diag([a, b, b, a]).astype(np.complex128)
    if name == "rxxyy":
        # exp(-i theta/4 (XX + YY)): rotates within the {|01>, |10>} block.
        (theta,) = p
        c, s = np.cos(theta / 2), np.sin(theta / 2)
        out = np.eye(4, dtype=np.complex128)
        out[1, 1] = out[2, 2] = c
        out[1, 2] = out[2, 1] = -1j * s
        return out
    raise ValueError(f"unknown gate {name!r}")


@dataclass(frozen=True)
class Instruction:
    """One circuit operation: a gate, ``measure``, ``reset`` or ``barrier``."""

    name: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()
    cbit: int | None = None
    matrix: np.ndarray | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(float(v) for v in self.params))
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"duplicate qubits in instruction {self.name!r}: {self.qubits}")
        if self.name in _GATE_ARITY:
            nq, npar = _GATE_ARITY[self.name]
            if len(self.qubits) != nq:
                raise ValueError(f"gate {self.name!r} expects {nq} qubit(s), got {len(self.qubits)}")
            if len(self.params) != npar:
                raise ValueError(f"gate {self.name!r} expects {npar} parameter(s)")
        elif self.name == "measure":
            if len(self.qubits) != 1 or self.cbit is None:
                raise ValueError("measure needs one qubit and a classical bit")
        elif self.name == "reset":
            if len(self.qubits) != 1:
                raise ValueError("reset acts on one qubit")
        elif self.name == "barrier":
            pass
        elif self.name == "unitary":
            if self.matrix is None:
                raise ValueError("unitary instruction needs a matrix")
            mat = np.asarray(self.matrix, dtype=np.complex128)
            expected = 2 ** len(self.qubits)
            if mat.shape != (expected, expected):
                raise ValueError("unitary matrix shape does not match qubit count")
            if not np.allclose(mat @ mat.conj().T, np.eye(expected), atol=1e-9):
                raise ValueError("unitary instruction matrix is not unitary")
            object.__setattr__(self, "matrix", mat)
        else:
            raise ValueError(f"unknown instruction {self.name!r}")

    @property
    def is_gate(self) -> bool:
        return self.name in _GATE_ARITY or self.name == "unitary"

    def matrix_or_named(self) -> np.ndarray:
        if self.name == "unitary":
            assert self.matrix is not None
            return self.matrix
        return gate_matrix(self.name, self.params)


class Circuit:
    """An ordered instruction list on a fixed number of qubits."""

    def __init__(self, num_qubits: int, metadata: dict | None = None) -> None:
        if num_qubits < 1:
            raise ValueError("num_qubits must be >= 1")
        self.num_qubits = int(num_qubits)
        self.instructions: list[Instruction] = []
        self.metadata: dict = dict(metadata or {})

    # -- construction -------------------------------------------------
    def append(self, instr: Instruction) -> "Circuit":
        for q in instr.qubits:
            if not 0 <= q < self.num_qubits:
                raise ValueError(f"qubit {q} out of range for {self.num_qubits}-qubit circuit")
        self.instructions.append(instr)
        return self

    def add(self, name: str, *qubits: int, params: Sequence[float] = ()) -> "Circuit":
        return self.append(Instruction(name, tuple(qubits), tuple(params)))

    def rz(self, theta: float, qubit: int) -> "Circuit":
        return self.add("rz", qubit, params=(theta,))

    def rx90(self, qubit: int) -> "Circuit":
        return self.add("rx90", qubit)

    def cx(self, control: int, target: int) -> "Circuit":
        return self.add("cx", control, target)

    def add_unitary(self, matrix: np.ndarray, *qubits: int) -> "Circuit":
        return self.append(Instruction("unitary", tuple(qubits), matrix=matrix))

    def barrier(self, *qubits: int) -> "Circuit":
        qs = tuple(qubits) if qubits else tuple(range(self.num_qubits))
        return self.append(Instruction("barrier", qs))

    def measure(self, qubit: int, cbit: int) -> "Circuit":
        return self.append(Instruction("measure", (qubit,), cbit=cbit))

    def measure_all(self) -> "Circuit":
        for q in range(self.num_qubits):
            self.measure(q, q)
        return self

    def reset(self, qubit: int) -> "Circuit":
        return self.append(Instruction("reset", (qubit,)))

    def extend(self, instructions: Iterable[Instruction]) -> "Circuit":
        for instr in instructions:
            self.append(instr)
        return self

    def copy(self) -> "Circuit":
        dup = Circuit(self.num_qubits, metadata=dict(self.metadata))
        dup.instructions = list(self.instructions)
        return dup

    # -- inspection ---------------------------------------------------
    def __len__(self) -> int:
        return len(self.instructions)

    @property
    def num_clbits(self) -> int:
        cbits = [i.cbit for i in self.instructions if i.name == "measure"]
        return (max(cbits) + 1) if cbits else 0

    def gate_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for instr in self.instructions:
            if instr.is_gate:
                counts[instr.name] = counts.get(instr.name, 0) + 1
        return counts

    def count(self, name: str) -> int:
        return sum(1 for i in self.instructions if i.name == name)

    def has_midcircuit_operations(self) -> bool:
        """True when a measurement/reset is followed by more quantum operations."""
        seen_measure = False
        measured: set[int] = set()
        for instr in self.instructions:
            if instr.name == "measure":
                if instr.qubits[0] in measured:
                    return True
                seen_measure = True
                measured.add(instr.qubits[0])
            elif instr.name == "reset":
                if seen_measure:
                    return True
            elif instr.is_gate and seen_measure:
                return True
        return False

    def unitary(self) -> np.ndarray:
        """Dense unitary of a measurement-free circuit (test-scale sizes)."""
        out = np.eye(2**self.num_qubits, dtype=np.complex128)
        for instr in self.instructions:
            if instr.name == "barrier":
                continue
            if not instr.is_gate:
                raise ValueError("circuit with measure/reset has no unitary")
            full = embed_unitary(instr.matrix_or_named(), instr.qubits, self.num_qubits)
            out = full @ out
        return out

    # -- serialisation ------------------------------------------------
    def to_text(self) -> str:
        lines = [f"qubits {self.num_qubits}"]
        for instr in self.instructions:
            if instr.name == "unitary":
                raise ValueError("raw unitary instructions have no text form")
            if instr.name == "measure":
                lines.append(f"measure {instr.qubits[0]} -> {instr.cbit}")
            elif instr.name == "barrier":
                if instr.qubits == tuple(range(self.num_qubits)):
                    lines.append("barrier")
                else:
                    lines.append("barrier " + " ".join(str(q) for q in instr.qubits))
            else:
                parts = [instr.name]
                parts.extend(repr(p) for p in instr.params)
                parts.extend(str(q) for q in instr.qubits)
                lines.append(" ".join(parts))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Circuit":
        circuit: Circuit | None = None
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                if tokens[0] == "qubits":
                    if circuit is not None:
                        raise ValueError("duplicate qubits declaration")
                    circuit = cls(int(tokens[1]))
                    continue
                if circuit is None:
                    raise ValueError("first statement must be 'qubits N'")
                if tokens[0] == "measure":
                    if len(tokens) != 4 or tokens[2] != "->":
                        raise ValueError("expected 'measure <qubit> -> <clbit>'")
                    circuit.measure(int(tokens[1]), int(tokens[3]))
                elif tokens[0] == "barrier":
                    circuit.barrier(*(int(t) for t in tokens[1:]))
                elif tokens[0] in _GATE_ARITY:
                    nq, npar = _GATE_ARITY[tokens[0]]
                    args = tokens[1:]
                    if len(args) != nq + npar:
                        raise ValueError(
                            f"gate {tokens[0]!r} expects {npar} parameter(s) and {nq} qubit(s)"
                        )
                    params = tuple(float(a) for a in args[:npar])
                    qubits = tuple(int(a) for a in args[npar:])
                    circuit.add(tokens[0], *qubits, params=params)
                elif tokens[0] == "reset":
                    circuit.reset(int(tokens[1]))
                else:
                    raise ValueError(f"unknown instruction {tokens[0]!r}")
            except (ValueError, IndexError) as exc:
                raise ValueError(f"line {lineno}: {exc}") from exc
        if circuit is None:
            raise ValueError("circuit text contains no 'qubits' declaration")
        return circuit


def embed_unitary(gate: np.ndarray, qubits: Sequence[int], num_qubits: int) -> np.ndarray:
    """Embed a k-qubit gate acting on ``qubits`` into the full register."""
    gate = np.asarray(gate, dtype=np.complex128)
    k = len(qubits)
    if gate.shape != (2**k, 2**k):
        raise ValueError("gate shape does not match qubit count")
    rest = [q for q in range(num_qubits) if q not in qubits]
    order = list(qubits) + rest
    full = np.kron(gate, np.eye(2 ** (num_qubits - k), dtype=np.complex128))
    tensor = full.reshape((2,) * (2 * num_qubits))
    inv = [order.index(q) for q in range(num_qubits)]
    tensor = np.transpose(tensor, axes=inv + [num_qubits + i for i in inv])
    return np.ascontiguousarray(tensor.reshape(2**num_qubits, 2**num_qubits))


def _norm_angle(theta: float) -> float:
    return float((theta + np.pi) % (2.0 * np.pi) - np.pi)


def transpile_1q(theta: float, phi: float, lam: float, qubit: int) -> list[Instruction]:
    """Native realisation of ``U(theta, phi, lam)`` on ``qubit``.

    Pure z-rotations (``theta ~ 0``) become a single virtual ``rz`` with no
    physical pulse; every other gate costs exactly two ``rx90`` pulses plus
    ``rz`` frame updates (emitted only for non-zero angles).
    """
    seq: list[Instruction] = []
    if abs(theta) < 1e-12 or abs(abs(theta) - 2.0 * np.pi) < 1e-12:
        norm = _norm_angle(phi + lam)
        if abs(norm) > 1e-12:
            seq.append(Instruction("rz", (qubit,), (norm,)))
        return seq
    for kind, angle in (
        ("rz", lam - np.pi),
        ("rx90", 0.0),
        ("rz", np.pi - theta),
        ("rx90", 0.0),
        ("rz", phi),
    ):
        if kind == "rx90":
            seq.append(Instruction("rx90", (qubit,)))
        else:
            norm = _norm_angle(angle)
            if abs(norm) > 1e-12:
                seq.append(Instruction("rz", (qubit,), (norm,)))
    return seq


def u3_angles_from_unitary(unitary: np.ndarray) -> tuple[float, float, float]:
    """Angles ``(theta, phi, lam)`` with ``U(theta, phi, lam) ~ unitary`` up to phase."""
    u = np.asarray(unitary, dtype=np.complex128)
    if u.shape != (2, 2) or not np.allclose(u @ u.conj().T, np.eye(2), atol=1e-8):
        raise ValueError("need a 2x2 unitary")
    c = abs(u[0, 0])
    s = abs(u[1, 0])
    theta = 2.0 * np.arctan2(s, c)
    if s < 1e-9:
        # Diagonal: all phase goes into lam.
        phi = 0.0
        lam = float(np.angle(u[1, 1]) - np.angle(u[0, 0]))
    elif c < 1e-9:
        # Anti-diagonal: all phase goes into phi.
        lam = 0.0
        phi = float(np.angle(u[1, 0]) - np.angle(-u[0, 1]))
    else:
        base = np.angle(u[0, 0])
        phi = float(np.angle(u[1, 0]) - base)
        lam = float(np.angle(-u[0, 1]) - base)
    return float(theta), _norm_angle(phi), _norm_angle(lam)


_ANGLES_FOR_NAMED: dict[str, tuple[float, float, float]] = {
    "x": (np.pi, 0.0, np.pi),
    "y": (np.pi, np.pi / 2, np.pi / 2),
    "h": (np.pi / 2, 0.0, np.pi),
}


def _lower(instr: Instruction) -> list[Instruction] | None:
    """One lowering step; None when the instruction is already native."""
    name = instr.name
    if name in NATIVE_GATE_ARITY or name in ("measure", "reset", "barrier"):
        return None
    q = instr.qubits
    if name == "unitary":
        assert instr.matrix is not None
        if len(q) == 1:
            return transpile_1q(*u3_angles_from_unitary(instr.matrix), q[0])
        if len(q) == 2:
            from . import kak

            out = []
            for gname, params, local_qubits in kak.decompose_2q(instr.matrix):
                mapped = tuple(q[i] for i in local_qubits)
                if gname == "u3":
                    out.extend(transpile_1q(*params, mapped[0]))
                else:
                    out.append(Instruction(gname, mapped, tuple(params)))
            return out
        raise ValueError("raw unitary lowering supports 1 or 2 qubits only")
    if name in _ANGLES_FOR_NAMED:
        return transpile_1q(*_ANGLES_FOR_NAMED[name], q[0])
    if name == "z":
        return [Instruction("rz", q, (np.pi,))]
    if name == "s":
        return [Instruction("rz", q, (np.pi / 2,))]
    if name == "sdg":
        return [Instruction("rz", q, (-np.pi / 2,))]
    if name == "t":
        return [Instruction("rz", q, (np.pi / 4,))]
    if name == "tdg":
        return [Instruction("rz", q, (-np.pi / 4,))]
    if name == "rx":
        return transpile_1q(instr.params[0], -np.pi / 2, np.pi / 2, q[0])
    if name == "ry":
        return transpile_1q(instr.params[0], 0.0, 0.0, q[0])
    if name == "u3":
        return transpile_1q(*instr.params, q[0])
    if name == "cz":
        return [
            *transpile_1q(*_ANGLES_FOR_NAMED["h"], q[1]),
            Instruction("cx", q),
            *transpile_1q(*_ANGLES_FOR_NAMED["h"], q[1]),
        ]
    if name == "swap":
        return [
            Instruction("cx", (q[0], q[1])),
            Instruction("cx", (q[1], q[0])),
            Instruction("cx", (q[0], q[1])),
        ]
    if name == "cp":
        lam = instr.params[0]
        return [
            Instruction("rz", (q[0],), (lam / 2,)),
            Instruction("rz", (q[1],), (lam / 2,)),
            Instruction("cx", q),
            Instruction("rz", (q[1],), (-lam / 2,)),
            Instruction("cx", q),
        ]
    if name in ("rzz",):
        theta = instr.params[0]
        return [
            Instruction("cx", q),
            Instruction("rz", (q[1],), (theta,)),
            Instruction("cx", q),
        ]
    if name in ("rxxyy", "fswap"):
        from . import kak

        steps = kak.decompose_2q(gate_matrix(name, instr.params))
        out: list[Instruction] = []
        for gname, params, local_qubits in steps:
            mapped = tuple(q[i] for i in local_qubits)
            if gname == "u3":
                out.extend(transpile_1q(*params, mapped[0]))
            else:
                out.append(Instruction(gname, mapped, tuple(params)))
        return out
    raise ValueError(f"no lowering rule for gate {name!r}")


def transpile(circuit: Circuit, extra_native: frozenset[str] = frozenset()) -> Circuit:
    """Lower all extended gates to the native set, preserving the unitary.

    ``extra_native`` names gate kinds a backend executes directly (beyond the
    standard native set); they pass through unlowered.
    """
    out = Circuit(circuit.num_qubits, metadata=dict(circuit.metadata))
    queue = list(circuit.instructions)
    while queue:
        instr = queue.pop(0)
        lowered = None if instr.name in extra_native else _lower(instr)
        if lowered is None:
            out.append(instr)
        else:
            queue = lowered + queue
    return out


def route(circuit: Circuit, coupling: Sequence[tuple[int, int]]) -> Circuit:
    """Rewrite ``cx`` gates so every 2-qubit gate runs on a coupled pair.

    ``coupling`` lists directed available ``cx`` pairs.  A reversed-only pair
    is handled by conjugating with Hadamards; a non-adjacent pair is routed
    with swap chains along a BFS shortest path (state swapped there and
    back, so qubit labels are preserved).  Raises when a pair is not
    connected at all.  The overall unitary is unchanged.
    """
    directed = {(int(a), int(b)) for a, b in coupling}
    undirected: dict[int, set[int]] = {}
    for a, b in directed:
        undirected.setdefault(a, set()).add(b)
        undirected.setdefault(b, set()).add(a)

    def cx_on(control: int, target: int) -> list[Instruction]:
        if (control, target) in directed:
            return [Instruction("cx", (control, target))]
        if (target, control) in directed:
            h = _ANGLES_FOR_NAMED["h"]
            return [
                *transpile_1q(*h, control),
                *transpile_1q(*h, target),
                Instruction("cx", (target, control)),
                *transpile_1q(*h, control),
                *transpile_1q(*h, target),
            ]
        raise ValueError(f"no coupling between {control} and {target}")

    def swap_on(a: int, b: int) -> list[Instruction]:
        return cx_on(a, b) + cx_on(b, a) + cx_on(a, b)

    def bfs_path(src: int, dst: int) -> list[int]:
        if src == dst:
            return [src]
        prev: dict[int, int] = {src: src}
        frontier = [src]
        while frontier:
            nxt = []
            for node in frontier:
                for nb in sorted(undirected.get(node, ())):
                    if nb not in prev:
                        prev[nb] = node
                        if nb == dst:
                            path = [dst]
                            while path[-1] != src:
                                path.append(prev[path[-1]])
                            return list(reversed(path))
                        nxt.append(nb)
            frontier = nxt
        raise ValueError(f"qubits {src} and {dst} are not connected")

    out = Circuit(circuit.num_qubits, metadata=dict(circuit.metadata))
    for instr in circuit.instructions:
        if instr.name != "cx" and instr.is_gate and len(instr.qubits) >= 2:
            a, b = instr.qubits
            if (a, b) in directed or (b, a) in directed:
                out.append(instr)
                continue
            raise ValueError("only cx gates can be routed through swap chains")
        if instr.name == "cx":
            control, target = instr.qubits
            if (control, target) in directed or (target, control) in directed:
                out.extend(cx_on(control, target))
                continue
            path = bfs_path(control, target)
            # Swap the control state down the path until adjacent to target.
            hops = path[:-1]
            for a, b in zip(hops, hops[1:]):
                out.extend(swap_on(a, b))
            out.extend(cx_on(hops[-1], target))
            for a, b in reversed(list(zip(hops, hops[1:]))):
                out.extend(swap_on(a, b))
        else:
            out.append(instr)
    return out
