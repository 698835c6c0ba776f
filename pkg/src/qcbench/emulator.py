"""Density-matrix circuit execution under a :class:`~qcbench.noise.NoiseModel`.

Execution semantics
-------------------
Circuits are transpiled to the native set ``{i, rx90, rz, cx}`` (and routed
when the backend declares a restricted coupling graph), then scheduled
*as late as possible* within barrier-delimited synchronization constraints.
Every instruction applies, in order:

1. amplitude/phase damping on each of its qubits for the idle gap since that
   qubit's previous instruction,
2. the ideal operation,
3. the gate kind's coherent error rotations and depolarizing channel,
4. damping on its qubits for the instruction's own duration
   (measurement-window damping is applied *before* the projective sample).

Measurements are projective.  When a circuit contains mid-circuit
operations, the engine follows every measurement outcome branch with its
Born weight (sequential collapse over all branches) and samples shot records
from the exact joint record distribution; readout confusion flips the
*recorded* bit only, never the post-measurement state.  Circuits whose
measurements all come last skip branching and sample a single multinomial
from the final diagonal.

Conventions: qubit 0 (and classical bit 0) is the leftmost character of
every bitstring.  All times are nanoseconds on a virtual clock; a run of
``shots`` shots advances the backend clock by
``shots * (circuit_duration + reset_duration)``.  Drift schedules are
evaluated once per run, at the run's start time.
"""

from __future__ import annotations

import abc
import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .circuit import NATIVE_GATE_ARITY, Circuit, Instruction, gate_matrix, transpile, route
from .noise import NoiseModel, damping_channel, evaluate_at
from .randomness import child_seed, make_rng

__all__ = [
    "BackendDescriptor",
    "ExecutionResult",
    "Backend",
    "DensityMatrixBackend",
    "MidcircuitProbe",
    "probe_usable_qubits",
    "probe_midcircuit",
]

MAX_DENSE_QUBITS = 10
_MAX_BRANCH_MEASURES = 12
_BRANCH_PRUNE = 1e-14


@dataclass(frozen=True)
class BackendDescriptor:
    """Static capabilities a backend reports (architecture probes read this)."""

    usable_qubits: int
    coupling: tuple[tuple[int, int], ...]  # directed pairs accepting cx
    native_gates: tuple[str, ...]
    supports_midcircuit: bool
    durations: dict[str, float]  # ns per native gate plus "measure"/"reset"

    def to_dict(self) -> dict:
        return {
            "usable_qubits": self.usable_qubits,
            "coupling": [list(p) for p in self.coupling],
            "native_gates": list(self.native_gates),
            "supports_midcircuit": self.supports_midcircuit,
            "durations": dict(self.durations),
        }

    def is_all_to_all(self) -> bool:
        n = self.usable_qubits
        return len(self.coupling) == n * (n - 1)


@dataclass(frozen=True)
class ExecutionResult:
    """Counts plus the duration ledger for one run.

    ``counts`` maps final classical-register strings (cbit 0 leftmost) to
    occurrences and always sums to ``shots``.  ``slot_records`` hold the
    per-measurement-slot marginal outcome counts in program order, which
    preserves values overwritten in the register by classical-bit reuse.
    """

    counts: dict[str, int]
    shots: int
    circuit_duration: float  # ns, critical path including measurement windows
    virtual_wall_time: float  # ns, shots * (circuit_duration + reset)
    start_time: float  # backend virtual clock at submission
    seed: int
    model_digest: str
    slot_records: tuple[dict, ...] = ()

    def __post_init__(self) -> None:
        if sum(self.counts.values()) != self.shots:
            raise ValueError("counts must sum to shots")

    def probability(self, bitstring: str) -> float:
        return self.counts.get(bitstring, 0) / self.shots

    def to_dict(self) -> dict:
        return {
            "counts": dict(sorted(self.counts.items())),
            "shots": self.shots,
            "circuit_duration_ns": self.circuit_duration,
            "virtual_wall_time_ns": self.virtual_wall_time,
            "start_time_ns": self.start_time,
            "seed": self.seed,
            "model_digest": self.model_digest,
            "slot_records": [dict(r) for r in self.slot_records],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


class Backend(abc.ABC):
    """Uniform execution interface every metric runs against."""

    @abc.abstractmethod
    def descriptor(self) -> BackendDescriptor:
        raise NotImplementedError

    @abc.abstractmethod
    def run(self, circuit: Circuit, shots: int, seed: int | None = None) -> ExecutionResult:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# dense tensor helpers (density matrix as a (2,)*2n tensor; row axes first)
# ---------------------------------------------------------------------------


def _contract(t: np.ndarray, m: np.ndarray, axes: list[int], total_axes: int) -> np.ndarray:
    k = len(axes)
    mt = m.reshape((2,) * (2 * k))
    t = np.tensordot(mt, t, axes=(tuple(range(k, 2 * k)), tuple(axes)))
    rest = [a for a in range(total_axes) if a not in axes]
    return np.moveaxis(t, range(total_axes), axes + rest)


def _apply_unitary(t: np.ndarray, m: np.ndarray, qubits: tuple[int, ...], nq: int) -> np.ndarray:
    rows = list(qubits)
    cols = [nq + q for q in qubits]
    t = _contract(t, m, rows, 2 * nq)
    return _contract(t, m.conj(), cols, 2 * nq)


def _apply_kraus(
    t: np.ndarray, ops: tuple[np.ndarray, ...], qubits: tuple[int, ...], nq: int
) -> np.ndarray:
    rows = list(qubits)
    cols = [nq + q for q in qubits]
    out = np.zeros_like(t)
    for op in ops:
        out += _contract(_contract(t, op, rows, 2 * nq), op.conj(), cols, 2 * nq)
    return out


def _apply_depolarizing(
    t: np.ndarray, gamma: float, qubits: tuple[int, ...], nq: int
) -> np.ndarray:
    """``rho -> (1-g) rho + g (I/2^k (x) Tr_qs rho)`` (uniform Pauli mixing)."""
    letters = [chr(ord("a") + i) for i in range(2 * nq)]
    for q in qubits:
        letters[nq + q] = letters[q]
    dropped = set(qubits) | {nq + q for q in qubits}
    out_letters = [letters[i] for i in range(2 * nq) if i not in dropped]
    reduced = np.einsum(f"{''.join(letters)}->{''.join(out_letters)}", t)
    k = len(qubits)
    mixed = np.zeros_like(t)
    for bits in itertools.product((0, 1), repeat=k):
        idx: list = [slice(None)] * (2 * nq)
        for j, q in enumerate(qubits):
            idx[q] = bits[j]
            idx[nq + q] = bits[j]
        mixed[tuple(idx)] = reduced / 2**k
    return (1.0 - gamma) * t + gamma * mixed


def _project(t: np.ndarray, qubit: int, outcome: int, nq: int) -> np.ndarray:
    out = np.zeros_like(t)
    idx: list = [slice(None)] * (2 * nq)
    idx[qubit] = outcome
    idx[nq + qubit] = outcome
    out[tuple(idx)] = t[tuple(idx)]
    return out


def _trace(t: np.ndarray, nq: int) -> float:
    n = 2**nq
    return float(np.trace(t.reshape(n, n)).real)


_RESET_OPS = (
    np.array([[1.0, 0.0], [0.0, 0.0]], dtype=np.complex128),
    np.array([[0.0, 1.0], [0.0, 0.0]], dtype=np.complex128),
)


# ---------------------------------------------------------------------------
# scheduling
# ---------------------------------------------------------------------------


def _instruction_duration(instr: Instruction, model: NoiseModel) -> float:
    if instr.name == "measure":
        return model.measurement_duration
    if instr.name == "reset":
        return model.reset_duration
    if instr.name == "barrier":
        return 0.0
    return model.gates[instr.name].duration


def _alap_schedule(circuit: Circuit, model: NoiseModel) -> tuple[list[tuple[float, int]], float]:
    """As-late-as-possible start times.  Returns (sorted (start, index), total)."""
    avail = [0.0] * circuit.num_qubits
    starts: dict[int, float] = {}
    for idx in range(len(circuit.instructions) - 1, -1, -1):
        instr = circuit.instructions[idx]
        qubits = instr.qubits
        sync = min(avail[q] for q in qubits)
        if instr.name == "barrier":
            for q in qubits:
                avail[q] = sync
            starts[idx] = sync
            continue
        start = sync - _instruction_duration(instr, model)
        starts[idx] = start
        for q in qubits:
            avail[q] = start
    total = -min(avail) if avail else 0.0
    ordered = sorted(((starts[i] + total, i) for i in starts), key=lambda p: (p[0], p[1]))
    return ordered, total


# ---------------------------------------------------------------------------
# engine
# ---------------------------------------------------------------------------


class _Engine:
    """Single-run evolution under a frozen (drift-evaluated) model snapshot."""

    def __init__(self, snapshot: NoiseModel, num_qubits: int) -> None:
        self.model = snapshot
        self.nq = num_qubits
        self._gate_mats: dict = {}
        self._damp_cache: dict = {}

    def _combined_matrix(self, instr: Instruction) -> np.ndarray | None:
        """Ideal gate followed by its coherent error, as one matrix."""
        spec = self.model.gates[instr.name]
        key = (instr.name, instr.params)
        if key not in self._gate_mats:
            err = spec.error_unitary(len(instr.qubits))
            if instr.name == "i":
                mat = err  # ideal part is the identity
            else:
                ideal = gate_matrix(instr.name, instr.params)
                mat = ideal if err is None else err @ ideal
            self._gate_mats[key] = mat
        return self._gate_mats[key]

    def _damping_ops(self, qubit: int, duration: float) -> tuple[np.ndarray, ...] | None:
        if duration <= 0:
            return None
        params = self.model.qubits[qubit]
        if np.isinf(params.t1) and np.isinf(params.t2):
            return None
        key = (qubit, duration)
        if key not in self._damp_cache:
            self._damp_cache[key] = damping_channel(params.t1, params.t2, duration).ops
        return self._damp_cache[key]

    def _damp(self, t: np.ndarray, qubit: int, duration: float) -> np.ndarray:
        ops = self._damping_ops(qubit, duration)
        if ops is None:
            return t
        return _apply_kraus(t, ops, (qubit,), self.nq)

    def _gap_damp(self, t: np.ndarray, instr: Instruction, start: float, last_end: list[float]) -> np.ndarray:
        for q in instr.qubits:
            gap = start - last_end[q]
            if gap > 1e-9:
                t = self._damp(t, q, gap)
        return t

    def _apply_gate(self, t: np.ndarray, instr: Instruction) -> np.ndarray:
        spec = self.model.gates[instr.name]
        mat = self._combined_matrix(instr)
        if mat is not None:
            t = _apply_unitary(t, mat, instr.qubits, self.nq)
        if spec.depolarizing_gamma > 0:
            t = _apply_depolarizing(t, spec.depolarizing_gamma, instr.qubits, self.nq)
        for q in instr.qubits:
            t = self._damp(t, q, spec.duration)
        return t

    def distribution(
        self, circuit: Circuit
    ) -> tuple[dict[tuple[int, ...], float], list[tuple[int, int]], float]:
        """Exact joint record distribution over measurement slots.

        Returns (record tuple -> probability, [(qubit, cbit)] in program
        order, circuit duration).  Records already include readout
        confusion.
        """
        for instr in circuit.instructions:
            if instr.is_gate and instr.name not in self.model.gates:
                raise ValueError(f"gate {instr.name!r} is not native; transpile first")
        ordered, total = _alap_schedule(circuit, self.model)
        slots = [
            (idx, instr.qubits[0], instr.cbit)
            for idx, instr in enumerate(circuit.instructions)
            if instr.name == "measure"
        ]
        slot_pos = {idx: pos for pos, (idx, _, _) in enumerate(slots)}
        n_slots = len(slots)
        if n_slots > _MAX_BRANCH_MEASURES:
            raise ValueError(
                f"too many measurements to branch exactly ({n_slots} > {_MAX_BRANCH_MEASURES})"
            )
        branch = circuit.has_midcircuit_operations()

        t0 = np.zeros((2,) * (2 * self.nq), dtype=np.complex128)
        t0[(0,) * (2 * self.nq)] = 1.0
        last_end = [0.0] * self.nq
        steps = [(start, idx, circuit.instructions[idx]) for start, idx in ordered]

        true_probs: dict[tuple[int, ...], float] = {}

        def finish(t: np.ndarray, outcomes: dict[int, int]) -> None:
            key = tuple(outcomes[p] for p in range(n_slots))
            true_probs[key] = true_probs.get(key, 0.0) + _trace(t, self.nq)

        def walk(t: np.ndarray, step_i: int, last_end: list[float], outcomes: dict[int, int]) -> None:
            while step_i < len(steps):
                start, idx, instr = steps[step_i]
                step_i += 1
                if instr.name == "barrier":
                    continue
                t = self._gap_damp(t, instr, start, last_end)
                end = start + _instruction_duration(instr, self.model)
                for q in instr.qubits:
                    last_end[q] = end
                if instr.name == "measure":
                    q = instr.qubits[0]
                    t = self._damp(t, q, self.model.measurement_duration)
                    if branch:
                        pos = slot_pos[idx]
                        for outcome in (0, 1):
                            proj = _project(t, q, outcome, self.nq)
                            if _trace(proj, self.nq) < _BRANCH_PRUNE:
                                continue
                            walk(proj, step_i, list(last_end), {**outcomes, pos: outcome})
                        return
                    continue  # terminal measure: sample jointly at the end
                if instr.name == "reset":
                    t = _apply_kraus(t, _RESET_OPS, instr.qubits, self.nq)
                    continue
                t = self._apply_gate(t, instr)
            if branch:
                finish(t, outcomes)
            else:
                # Joint distribution of all terminal measures from the diagonal.
                n = 2**self.nq
                diag = np.diagonal(t.reshape(n, n)).real.reshape((2,) * self.nq)
                slot_qubits = [q for _, q, _ in slots]
                rest = [q for q in range(self.nq) if q not in slot_qubits]
                marg = np.transpose(diag, axes=slot_qubits + rest).reshape(2**n_slots, -1)
                probs = marg.sum(axis=1)
                for flat, p in enumerate(probs):
                    if p < _BRANCH_PRUNE:
                        continue
                    bits = tuple((flat >> (n_slots - 1 - i)) & 1 for i in range(n_slots))
                    true_probs[bits] = true_probs.get(bits, 0.0) + float(p)

        walk(t0, 0, last_end, {})
        total_p = sum(true_probs.values())
        if abs(total_p - 1.0) > 1e-8:
            raise RuntimeError(f"branch probabilities sum to {total_p}, expected 1")
        record_probs = self._apply_confusion(true_probs, [q for _, q, _ in slots])
        return record_probs, [(q, c) for _, q, c in slots], total

    def _apply_confusion(
        self, true_probs: dict[tuple[int, ...], float], slot_qubits: list[int]
    ) -> dict[tuple[int, ...], float]:
        m = len(slot_qubits)
        if m == 0:
            return true_probs
        confusions = [self.model.qubits[q].confusion_matrix for q in slot_qubits]
        if all(np.array_equal(c, np.eye(2)) for c in confusions):
            return true_probs
        vec = np.zeros((2,) * m)
        for bits, p in true_probs.items():
            vec[bits] += p
        for axis, conf in enumerate(confusions):
            vec = np.moveaxis(np.tensordot(vec, conf, axes=([axis], [0])), -1, axis)
        out: dict[tuple[int, ...], float] = {}
        for bits in itertools.product((0, 1), repeat=m):
            p = float(vec[bits])
            if p > _BRANCH_PRUNE:
                out[bits] = p
        return out

    def final_density_matrix(self, circuit: Circuit) -> np.ndarray:
        if any(i.name == "measure" for i in circuit.instructions):
            raise ValueError("final_density_matrix requires a measurement-free circuit")
        ordered, _ = _alap_schedule(circuit, self.model)
        t = np.zeros((2,) * (2 * self.nq), dtype=np.complex128)
        t[(0,) * (2 * self.nq)] = 1.0
        last_end = [0.0] * self.nq
        for start, idx in ordered:
            instr = circuit.instructions[idx]
            if instr.name == "barrier":
                continue
            t = self._gap_damp(t, instr, start, last_end)
            end = start + _instruction_duration(instr, self.model)
            for q in instr.qubits:
                last_end[q] = end
            if instr.name == "reset":
                t = _apply_kraus(t, _RESET_OPS, instr.qubits, self.nq)
            else:
                t = self._apply_gate(t, instr)
        n = 2**self.nq
        return t.reshape(n, n)


# ---------------------------------------------------------------------------
# backend
# ---------------------------------------------------------------------------


class DensityMatrixBackend(Backend):
    """Reference emulator: dense density matrix, virtual clock, drift-aware."""

    def __init__(
        self,
        model: NoiseModel,
        *,
        coupling: tuple[tuple[int, int], ...] | None = None,
        supports_midcircuit: bool = True,
        max_qubits: int = MAX_DENSE_QUBITS,
    ) -> None:
        self.model = model
        self._usable = min(model.num_qubits, max_qubits)
        if coupling is None:
            coupling = tuple(
                (a, b)
                for a in range(self._usable)
                for b in range(self._usable)
                if a != b
            )
        self._coupling = tuple((int(a), int(b)) for a, b in coupling)
        self._supports_midcircuit = supports_midcircuit
        self._clock = 0.0
        self._run_counter = 0

    # -- clock ---------------------------------------------------------
    @property
    def clock_ns(self) -> float:
        """Current virtual time; stability metrics timestamp runs with this."""
        return self._clock

    clock_unit = "virtual_ns"

    def reset_clock(self) -> None:
        self._clock = 0.0
        self._run_counter = 0

    # -- interface -----------------------------------------------------
    def descriptor(self) -> BackendDescriptor:
        return BackendDescriptor(
            usable_qubits=self._usable,
            coupling=self._coupling,
            native_gates=tuple(self.model.gates),
            supports_midcircuit=self._supports_midcircuit,
            durations={
                **{name: spec.duration for name, spec in self.model.gates.items()},
                "measure": self.model.measurement_duration,
                "reset": self.model.reset_duration,
            },
        )

    def _check(self, circuit: Circuit) -> None:
        if circuit.num_qubits > self._usable:
            raise ValueError(
                f"circuit needs {circuit.num_qubits} qubits, backend has {self._usable}"
            )
        if not self._supports_midcircuit and circuit.has_midcircuit_operations():
            raise ValueError("backend does not support mid-circuit operations")

    def _prepare(self, circuit: Circuit) -> Circuit:
        extra = frozenset(self.model.gates) - frozenset(NATIVE_GATE_ARITY)
        native = transpile(circuit, extra_native=extra)
        pairs = set(self._coupling)
        n = circuit.num_qubits
        fully_coupled = all(
            (a, b) in pairs for a in range(n) for b in range(n) if a != b
        )
        if not fully_coupled:
            native = route(native, self._coupling)
        return native

    def snapshot(self) -> NoiseModel:
        """Drift-evaluated model at the current virtual time."""
        return evaluate_at(self.model, self._clock)

    def run(self, circuit: Circuit, shots: int, seed: int | None = None) -> ExecutionResult:
        if shots < 1:
            raise ValueError("shots must be >= 1")
        self._check(circuit)
        if seed is None:
            seed = child_seed(self.model.seed, "run", self._run_counter)
        self._run_counter += 1
        snapshot = self.snapshot()
        engine = _Engine(snapshot, circuit.num_qubits)
        record_probs, slots, duration = engine.distribution(self._prepare(circuit))

        keys = sorted(record_probs)
        probs = np.array([record_probs[k] for k in keys], dtype=float)
        probs = np.clip(probs, 0.0, None)
        probs /= probs.sum()
        rng = make_rng(seed, "counts")
        draws = rng.multinomial(shots, probs) if keys else np.array([], dtype=int)

        num_clbits = circuit.num_clbits
        last_writer: dict[int, int] = {}
        for pos, (_, cbit) in enumerate(slots):
            last_writer[cbit] = pos
        counts: dict[str, int] = {}
        slot_zero = [0] * len(slots)
        slot_one = [0] * len(slots)
        for key, n in zip(keys, draws):
            if n == 0:
                continue
            register = ["0"] * num_clbits
            for cbit, pos in last_writer.items():
                register[cbit] = str(key[pos])
            counts_key = "".join(register)
            counts[counts_key] = counts.get(counts_key, 0) + int(n)
            for pos, bit in enumerate(key):
                if bit:
                    slot_one[pos] += int(n)
                else:
                    slot_zero[pos] += int(n)
        if not slots:
            counts = {"": shots}

        wall = shots * (duration + snapshot.reset_duration)
        result = ExecutionResult(
            counts=counts,
            shots=shots,
            circuit_duration=duration,
            virtual_wall_time=wall,
            start_time=self._clock,
            seed=seed,
            model_digest=snapshot.digest(),
            slot_records=tuple(
                {"qubit": q, "cbit": c, "zeros": slot_zero[i], "ones": slot_one[i]}
                for i, (q, c) in enumerate(slots)
            ),
        )
        self._clock += wall
        return result

    # -- exact queries (no clock advance) ------------------------------
    def exact_distribution(self, circuit: Circuit) -> dict[str, float]:
        """Exact final-register distribution at the current virtual time."""
        self._check(circuit)
        engine = _Engine(self.snapshot(), circuit.num_qubits)
        record_probs, slots, _ = engine.distribution(self._prepare(circuit))
        num_clbits = circuit.num_clbits
        last_writer = {cbit: pos for pos, (_, cbit) in enumerate(slots)}
        out: dict[str, float] = {}
        for key, p in record_probs.items():
            register = ["0"] * num_clbits
            for cbit, pos in last_writer.items():
                register[cbit] = str(key[pos])
            k = "".join(register)
            out[k] = out.get(k, 0.0) + p
        return out

    def final_density_matrix(self, circuit: Circuit) -> np.ndarray:
        """Exact output state of a measurement-free circuit (oracle hook)."""
        self._check(circuit)
        engine = _Engine(self.snapshot(), circuit.num_qubits)
        return engine.final_density_matrix(self._prepare(circuit))

    def circuit_duration(self, circuit: Circuit) -> float:
        """Critical-path duration (ns) without executing the state evolution."""
        _, total = _alap_schedule(self._prepare(circuit), self.snapshot())
        return total


# ---------------------------------------------------------------------------
# architecture probes
# ---------------------------------------------------------------------------


def probe_usable_qubits(
    backend: Backend, *, max_width: int = 64, shots: int = 8, seed: int = 0
) -> int:
    """Largest circuit width the backend accepts with full-length outputs.

    Widens one qubit at a time until the backend rejects the job or returns
    truncated bitstrings; returns the last accepted width.
    """
    last_ok = 0
    first_error: Exception | None = None
    for n in range(1, max_width + 1):
        circ = Circuit(n)
        for q in range(n):
            circ.add("x", q)
        circ.measure_all()
        try:
            result = backend.run(circ, shots, seed=child_seed(seed, "probe-width", n))
        except Exception as exc:  # rejection ends the scan
            first_error = exc
            break
        if any(len(k) != n for k in result.counts):
            break
        last_ok = n
    if last_ok == 0:
        raise RuntimeError("backend rejected even a one-qubit circuit") from first_error
    return last_ok


@dataclass(frozen=True)
class MidcircuitProbe:
    supported: bool
    consistency: float | None = None
    counts: dict[str, int] = field(default_factory=dict)


def probe_midcircuit(backend: Backend, shots: int = 1000, seed: int = 0) -> MidcircuitProbe:
    """Mid-circuit measurement check on an entangled pair.

    Prepares a Bell pair, measures the first qubit mid-circuit, unwinds the
    entangler, and measures the second qubit: ideally the record is "00"
    when the first outcome is 0 and "10" when it is 1.  ``consistency`` is
    the fraction of shots obeying that rule.
    """
    if not backend.descriptor().supports_midcircuit:
        return MidcircuitProbe(supported=False)
    circ = Circuit(2)
    circ.add("h", 0).cx(0, 1).measure(0, 0).cx(0, 1).measure(1, 1)
    try:
        result = backend.run(circ, shots, seed=seed)
    except Exception:
        return MidcircuitProbe(supported=False)
    good = result.counts.get("00", 0) + result.counts.get("10", 0)
    return MidcircuitProbe(
        supported=True, consistency=good / shots, counts=dict(result.counts)
    )
