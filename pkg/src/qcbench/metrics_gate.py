"""Gate-quality metrics: process tomography, randomized benchmarking, cycle
benchmarking, rotation-angle error, and SPAM/readout fidelity.

Experiments provided here:

* :func:`process_tomography_ptm` -- linear-inversion process tomography of a
  1- or 2-qubit gate over the informationally complete preparation set
  {|0>, |1>, |+>, |R>} per qubit and X/Y/Z measurement bases, with readout
  correction by an independently estimated confusion matrix and a
  trace-preservation projection (first PTM row reset).
* :func:`gate_process_fidelity` -- process fidelity of the tomography
  estimate against the ideal gate.
* :func:`clifford_rb` -- standard Clifford randomized benchmarking: random
  group sequences closed by the exact group inverse, survival of the initial
  bitstring fitted to ``A α^m + B``, error per Clifford
  ``r = (1 - α)(1 - 1/d)``.
* :func:`interleaved_rb` -- interleaved variant sharing the reference run's
  sequence draws; target-gate error ``r_t = (d - 1)(1 - α_int/α_ref)/d``.
* :func:`cycle_benchmark` -- Pauli-randomized cycle benchmarking: for each
  sampled Pauli string the cycle is applied ``m`` times dressed in random
  Pauli frames ``R'·G·R = G`` with ``R' = G R G^dagger``, eigenvalue parities
  are averaged into ``f_{P,m}``, and the per-cycle fidelity ``f_P`` comes
  from a two-length ratio or a one-constrained exponential fit; ``F_CB`` is
  the mean of ``f_P`` over the sampled strings.
* :func:`rotation_error` -- over/under-rotation of a single-qubit rotation
  amplified through pseudo-identities (n applications totalling 2 pi); the
  oscillation of the return probability gives the magnitude per gate, and a
  dedicated run against the cross-product state at the first equilibrium
  crossing resolves the sign (P(0) > 1/2 means over-rotation).
* :func:`spam_and_readout_fidelity` -- readout fidelity
  ``F_r = P(0|0) + P(1|1)`` (sums to 2 when perfect; kept in that
  convention), plus tomography-based estimates of the initial-state fidelity
  and of the measurement projectors, assuming near-ideal basis-change gates.

White-box helpers :func:`native_gate_ptm` and
:func:`native_gate_process_fidelity` build the closed-form channel of a
single scheduled native gate (ideal unitary + coherent error, then
depolarizing, then per-qubit damping over the gate duration) for comparison
against the sampled estimates.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .circuit import Circuit, Instruction, gate_matrix
from .clifford import clifford_group
from .emulator import Backend
from .fit import FitResult, _levenberg_marquardt, fit_damped_cosine, fit_geometric
from .noise import NoiseModel, damping_channel, depolarizing_channel
from .qmath import pauli_labels, pauli_matrix, process_fidelity, ptm_from_unitary
from .randomness import child_seed, make_rng
from .reporting import MetricReport, open_report

__all__ = [
    "CliffordElement",
    "RbOutcome",
    "CycleBenchOutcome",
    "PauliTransferMatrix",
    "native_gate_ptm",
    "native_gate_process_fidelity",
    "estimate_confusion",
    "process_tomography_ptm",
    "gate_process_fidelity",
    "clifford_rb",
    "interleaved_rb",
    "cycle_benchmark",
    "rotation_error",
    "spam_and_readout_fidelity",
]

logger = logging.getLogger(__name__)

PREP_LABELS = ("0", "1", "+", "R")

# Preparation and basis-change sequences as (gate, params) pairs, chosen so
# every layer costs at most one physical pulse (plus virtual rz) except the
# unavoidable two-pulse |1> preparation; leaner SPAM layers keep the
# linear-inversion estimate closer to the bare gate under test.
_PREP_GATES: dict[str, tuple[tuple[str, tuple[float, ...]], ...]] = {
    "0": (),
    "1": (("x", ()),),
    "+": (("rx90", ()), ("rz", (np.pi / 2,))),
    "R": (("rx90", ()), ("rz", (np.pi,))),
}

_BASIS_GATES: dict[str, tuple[tuple[str, tuple[float, ...]], ...]] = {
    "Z": (),
    "X": (("rz", (np.pi / 2,)), ("rx90", ())),
    "Y": (("rx90", ()),),
}

# Circuits that prepare the +1 eigenstate of a Pauli letter from |0> and the
# corresponding inverse applied before a computational-basis measurement.
_EIGEN_PREP: dict[str, tuple[str, ...]] = {
    "I": (),
    "Z": (),
    "X": ("h",),
    "Y": ("h", "s"),
}
_EIGEN_UNPREP: dict[str, tuple[str, ...]] = {
    "I": (),
    "Z": (),
    "X": ("h",),
    "Y": ("sdg", "h"),
}


def _prep_state(label: str) -> np.ndarray:
    vec = {
        "0": np.array([1.0, 0.0]),
        "1": np.array([0.0, 1.0]),
        "+": np.array([1.0, 1.0]) / np.sqrt(2.0),
        "R": np.array([1.0, 1.0j]) / np.sqrt(2.0),
    }[label]
    return np.outer(vec, vec.conj())


# ---------------------------------------------------------------------------
# white-box single-gate channels
# ---------------------------------------------------------------------------


def native_gate_ptm(
    model: NoiseModel,
    kind: str,
    qubits: tuple[int, ...] = (0,),
    params: tuple[float, ...] = (),
) -> np.ndarray:
    """Closed-form PTM of one scheduled native gate of the model.

    Composition order matches the backend's per-instruction application:
    ideal unitary combined with the coherent error, then the depolarizing
    channel, then amplitude/phase damping on each participating qubit for
    the gate duration (qubit order = tensor order).
    """
    spec = model.gates[kind]
    nq = len(qubits)
    dim = 2**nq
    err = spec.error_unitary(nq)
    if kind == "i":
        u = err if err is not None else np.eye(dim, dtype=np.complex128)
    else:
        ideal = gate_matrix(kind, tuple(params))
        u = ideal if err is None else err @ ideal
    s = ptm_from_unitary(u)
    if spec.depolarizing_gamma > 0:
        s = depolarizing_channel(spec.depolarizing_gamma, nq).ptm() @ s
    if spec.duration > 0:
        damp = None
        for q in qubits:
            p = model.qubits[q]
            dq = damping_channel(p.t1, p.t2, spec.duration).ptm()
            damp = dq if damp is None else np.kron(damp, dq)
        if damp is not None:
            s = damp @ s
    return s


def native_gate_process_fidelity(
    model: NoiseModel,
    kind: str,
    qubits: tuple[int, ...] = (0,),
    params: tuple[float, ...] = (),
) -> float:
    """Process fidelity of the white-box native-gate channel vs the ideal gate."""
    noisy = native_gate_ptm(model, kind, qubits, params)
    if kind == "i":
        ideal = np.eye(noisy.shape[0])
    else:
        ideal = ptm_from_unitary(gate_matrix(kind, tuple(params)))
    return process_fidelity(noisy, ideal)


# ---------------------------------------------------------------------------
# readout confusion estimation and process tomography
# ---------------------------------------------------------------------------


def estimate_confusion(
    backend: Backend, qubits: tuple[int, ...], shots: int = 4000, seed: int = 0
) -> np.ndarray:
    """Measured confusion matrix ``C[out, true]`` over the listed qubits.

    Each computational basis state is prepared with X gates and measured
    immediately; columns are the resulting outcome distributions.  The X
    pulses are themselves noisy on realistic models, which folds a small
    preparation error into the estimate (inherent to the method).
    """
    nq = len(qubits)
    width = max(qubits) + 1
    dim = 2**nq
    mat = np.zeros((dim, dim))
    for true_idx in range(dim):
        circuit = Circuit(width)
        for pos, q in enumerate(qubits):
            if (true_idx >> (nq - 1 - pos)) & 1:
                circuit.add("x", q)
        for pos, q in enumerate(qubits):
            circuit.measure(q, pos)
        result = backend.run(circuit, shots, seed=child_seed(seed, "confusion", true_idx))
        for key, n in result.counts.items():
            mat[int(key, 2), true_idx] = n / shots
    return mat


@dataclass(frozen=True)
class PauliTransferMatrix:
    """Tomography estimate of a channel in the normalized Pauli basis."""

    matrix: np.ndarray
    stderr: np.ndarray
    labels: tuple[str, ...]
    qubits: tuple[int, ...]
    shots_per_setting: int

    def __post_init__(self) -> None:
        mat = np.asarray(self.matrix, dtype=float)
        err = np.asarray(self.stderr, dtype=float)
        dim = len(self.labels)
        if mat.shape != (dim, dim) or err.shape != (dim, dim):
            raise ValueError("matrix and stderr must be square over the Pauli labels")
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "stderr", err)


def _counts_vector(counts: dict[str, int], nq: int, shots: int) -> np.ndarray:
    vec = np.zeros(2**nq)
    for key, n in counts.items():
        vec[int(key, 2)] = n / shots
    return vec


_PARITY_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _parity_signs(mask: int, nq: int) -> np.ndarray:
    """Vector of (-1)^(popcount(outcome & mask)) over all 2**nq outcomes."""
    key = (mask, nq)
    if key not in _PARITY_CACHE:
        outcomes = np.arange(2**nq)
        bits = outcomes & mask
        pops = np.array([bin(b).count("1") for b in bits])
        _PARITY_CACHE[key] = np.where(pops % 2 == 0, 1.0, -1.0)
    return _PARITY_CACHE[key]


def process_tomography_ptm(
    backend: Backend,
    gate: Circuit,
    shots: int = 1024,
    *,
    seed: int = 0,
    confusion_shots: int = 8000,
) -> PauliTransferMatrix:
    """Linear-inversion process tomography of a 1- or 2-qubit circuit.

    Preparations run over the informationally complete set
    {|0>, |1>, |+>, |R>} per qubit, measurements over the X/Y/Z bases per
    qubit.  Outcome distributions are corrected with an independently
    estimated confusion matrix before expectation values are extracted, the
    linear system is solved exactly (the fixed preparation set is never
    singular), and the first row is reset to (1, 0, ..., 0) so the estimate
    is trace preserving.  Statistical noise can still leave the map slightly
    non-physical (non-PSD Choi); the raw estimate is returned rather than
    projected, with per-element standard errors for tolerancing.
    """
    nq = gate.num_qubits
    if nq not in (1, 2):
        raise ValueError("process tomography supports 1- or 2-qubit gates")
    qubits = tuple(range(nq))
    dim = 4**nq
    labels = pauli_labels(nq)

    confusion = estimate_confusion(
        backend, qubits, confusion_shots, child_seed(seed, "tomo-confusion")
    )
    conf_inv = np.linalg.inv(confusion)

    preps = list(product(PREP_LABELS, repeat=nq))
    bases = list(product("XYZ", repeat=nq))

    # expectation accumulators: (pauli index, prep index) -> list of estimates
    est_sum = np.zeros((dim, len(preps)))
    est_var = np.zeros((dim, len(preps)))
    est_n = np.zeros((dim, len(preps)))

    for p_idx, prep in enumerate(preps):
        for b_idx, basis in enumerate(bases):
            circuit = Circuit(nq)
            for q, state in enumerate(prep):
                for name, params in _PREP_GATES[state]:
                    circuit.add(name, q, params=params)
            circuit.extend(gate.instructions)
            for q, letter in enumerate(basis):
                for name, params in _BASIS_GATES[letter]:
                    circuit.add(name, q, params=params)
            for q in qubits:
                circuit.measure(q, q)
            result = backend.run(
                circuit, shots, seed=child_seed(seed, "tomo", p_idx, b_idx)
            )
            p_corr = conf_inv @ _counts_vector(result.counts, nq, shots)
            # every sub-label with I or the basis letter per qubit is measured
            for mask_bits in range(2**nq):
                letters = []
                mask = 0
                for q in range(nq):
                    if (mask_bits >> (nq - 1 - q)) & 1:
                        letters.append(basis[q])
                        mask |= 1 << (nq - 1 - q)
                    else:
                        letters.append("I")
                pauli_idx = labels.index("".join(letters))
                expv = float(_parity_signs(mask, nq) @ p_corr)
                est_sum[pauli_idx, p_idx] += expv
                est_var[pauli_idx, p_idx] += (1.0 - min(expv**2, 1.0) + 0.25) / shots
                est_n[pauli_idx, p_idx] += 1

    expectations = est_sum / est_n
    exp_var = est_var / est_n**2

    # Gram matrix of the ideal preparations: C[j, k] = Tr[P_j rho_k]
    gram = np.zeros((dim, dim))
    for k, prep in enumerate(preps):
        rho = _prep_state(prep[0])
        for state in prep[1:]:
            rho = np.kron(rho, _prep_state(state))
        for j, lab in enumerate(labels):
            gram[j, k] = np.real(np.trace(pauli_matrix(lab) @ rho))
    gram_inv = np.linalg.inv(gram)

    ptm = expectations @ gram_inv
    var = exp_var @ (gram_inv**2)
    ptm[0, :] = 0.0
    ptm[0, 0] = 1.0
    var[0, :] = 0.0
    return PauliTransferMatrix(
        matrix=ptm,
        stderr=np.sqrt(var),
        labels=labels,
        qubits=qubits,
        shots_per_setting=shots,
    )


def gate_process_fidelity(
    backend: Backend,
    gate: Circuit,
    shots: int = 1024,
    *,
    seed: int = 0,
    confusion_shots: int = 8000,
) -> MetricReport:
    """Process fidelity of the tomography-estimated channel vs the ideal gate."""
    config = {
        "gate": [[i.name, list(i.qubits), list(i.params)] for i in gate.instructions],
        "num_qubits": gate.num_qubits,
        "shots": shots,
        "confusion_shots": confusion_shots,
    }
    builder = open_report("process_fidelity", backend, config, seed)
    tomo = process_tomography_ptm(
        backend, gate, shots, seed=seed, confusion_shots=confusion_shots
    )
    s_ideal = ptm_from_unitary(gate.unitary())
    dim2 = s_ideal.shape[0]
    f_pro = float(np.trace(s_ideal.T @ tomo.matrix).real) / dim2
    sigma = float(np.sqrt(np.sum((s_ideal * tomo.stderr) ** 2))) / dim2
    return builder.finish(
        values={"f_pro": f_pro},
        uncertainties={"f_pro": sigma},
        series={
            "ptm": tomo.matrix,
            "ptm_stderr": tomo.stderr,
            "pauli_labels": list(tomo.labels),
        },
    )


# ---------------------------------------------------------------------------
# randomized benchmarking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CliffordElement:
    """One element of the tabulated 1- or 2-qubit Clifford group."""

    index: int
    num_qubits: int

    def __post_init__(self) -> None:
        group = clifford_group(self.num_qubits)
        if not 0 <= self.index < group.size:
            raise ValueError(f"index {self.index} outside group of size {group.size}")

    @property
    def group(self):
        return clifford_group(self.num_qubits)

    def matrix(self) -> np.ndarray:
        return self.group.matrix(self.index)

    def decomposition(self) -> tuple[Instruction, ...]:
        return self.group.decomposition(self.index)


@dataclass(frozen=True)
class RbOutcome:
    """Randomized-benchmarking result bundle.

    ``survivals[i][c]`` is the initial-bitstring return probability of
    circuit ``c`` at the i-th sequence length; ``circuits`` holds the exact
    executed circuits for reproducibility dumps.
    """

    qubits: tuple[int, ...]
    lengths: tuple[int, ...]
    survivals: tuple[tuple[float, ...], ...]
    circuits: tuple[tuple[Circuit, ...], ...]
    fit: FitResult
    r: float
    r_stderr: float
    avg_pulses_per_element: float
    avg_cx_per_element: float
    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        for row in self.survivals:
            for s in row:
                if not 0.0 <= s <= 1.0:
                    raise ValueError(f"survival probability {s} outside [0, 1]")

    @property
    def mean_survivals(self) -> tuple[float, ...]:
        return tuple(float(np.mean(row)) for row in self.survivals)


def _rb_sequence_indices(group, seed: int, m: int) -> list[int]:
    rng = make_rng(seed)
    return [group.sample(rng) for _ in range(m)]


def _embed(circuit: Circuit, instrs: tuple[Instruction, ...], qubits: tuple[int, ...]) -> None:
    for ins in instrs:
        mapped = tuple(qubits[q] for q in ins.qubits)
        circuit.add(ins.name, *mapped, params=ins.params)


def _rb_circuit(
    group,
    indices: list[int],
    qubits: tuple[int, ...],
    width: int,
    interleave: CliffordElement | None = None,
) -> Circuit:
    circuit = Circuit(width)
    composed: list[int] = []
    for idx in indices:
        _embed(circuit, group.decomposition(idx), qubits)
        composed.append(idx)
        if interleave is not None:
            _embed(circuit, interleave.decomposition(), qubits)
            composed.append(interleave.index)
    inverse = group.inverse(group.compose(composed)) if composed else group.identity_index
    _embed(circuit, group.decomposition(inverse), qubits)
    for pos, q in enumerate(qubits):
        circuit.measure(q, pos)
    return circuit


def clifford_rb(
    backend: Backend,
    qubits: tuple[int, ...] = (0,),
    lengths: tuple[int, ...] = (1, 16, 48, 96, 160, 256, 384, 512, 704),
    n_circ: int = 10,
    shots: int = 1000,
    seed: int = 0,
    *,
    _interleave: CliffordElement | None = None,
    _tag: str = "rb",
) -> RbOutcome:
    """Standard Clifford randomized benchmarking on the listed qubits.

    Each circuit applies ``m`` uniformly random group elements (optionally
    with a fixed element interleaved after each) followed by the exact group
    inverse of the whole sequence, then measures the survival probability of
    the all-zeros bitstring.  The decay ``A α^m + B`` gives the error per
    element ``r = (1 - α)(1 - 1/d)``.
    """
    nq = len(qubits)
    group = clifford_group(nq)
    width = max(qubits) + 1
    d = 2**nq
    target_key = "0" * nq

    survivals: list[tuple[float, ...]] = []
    circuits: list[tuple[Circuit, ...]] = []
    pulse_counts: list[int] = []
    cx_counts: list[int] = []
    xs: list[float] = []
    ys: list[float] = []
    for li, m in enumerate(lengths):
        row: list[float] = []
        row_circuits: list[Circuit] = []
        for c in range(n_circ):
            indices = _rb_sequence_indices(group, child_seed(seed, "rb-seq", li, c), m)
            circuit = _rb_circuit(group, indices, qubits, width, _interleave)
            pulse_counts.extend(group.pulse_count(i) for i in indices)
            cx_counts.extend(group.cx_count(i) for i in indices)
            result = backend.run(circuit, shots, seed=child_seed(seed, _tag, li, c))
            survival = result.counts.get(target_key, 0) / shots
            row.append(survival)
            row_circuits.append(circuit)
            xs.append(float(m))
            ys.append(survival)
        survivals.append(tuple(row))
        circuits.append(tuple(row_circuits))

    fit = fit_geometric(np.array(xs), np.array(ys))
    alpha = fit.params["alpha"]
    alpha_err = fit.stderr["alpha"]
    flags = list(fit.flags)
    if "no_decay" in flags or alpha_err > max(1.0 - alpha, 0.0):
        if "decay_not_resolved" not in flags:
            flags.append("decay_not_resolved")
        r = 0.0 if "no_decay" in flags else (1.0 - alpha) * (1.0 - 1.0 / d)
    else:
        r = (1.0 - alpha) * (1.0 - 1.0 / d)
    r_stderr = alpha_err * (1.0 - 1.0 / d)

    return RbOutcome(
        qubits=qubits,
        lengths=tuple(int(m) for m in lengths),
        survivals=tuple(survivals),
        circuits=tuple(circuits),
        fit=fit,
        r=float(r),
        r_stderr=float(r_stderr),
        avg_pulses_per_element=float(np.mean(pulse_counts)) if pulse_counts else 0.0,
        avg_cx_per_element=float(np.mean(cx_counts)) if cx_counts else 0.0,
        flags=tuple(flags),
    )


def interleaved_rb(
    backend: Backend,
    target: CliffordElement,
    qubits: tuple[int, ...] = (0,),
    lengths: tuple[int, ...] = (1, 16, 48, 96, 160, 256, 384, 512, 704),
    n_circ: int = 10,
    shots: int = 1000,
    seed: int = 0,
) -> MetricReport:
    """Interleaved randomized benchmarking of one Clifford element.

    The reference and interleaved runs share the same random sequence draws
    (identical seeds), so their ratio isolates the interleaved element:
    ``r_t = (d - 1)(1 - α_int/α_ref)/d``.  A statistically negative estimate
    is reported as-is with a warning flag instead of being clipped.
    """
    if target.num_qubits != len(qubits):
        raise ValueError("target element width must match the qubit tuple")
    config = {
        "target_index": target.index,
        "qubits": list(qubits),
        "lengths": list(lengths),
        "n_circ": n_circ,
        "shots": shots,
    }
    builder = open_report("interleaved_rb", backend, config, seed)
    reference = clifford_rb(backend, qubits, lengths, n_circ, shots, seed, _tag="rb-ref")
    interleaved = clifford_rb(
        backend, qubits, lengths, n_circ, shots, seed, _interleave=target, _tag="rb-int"
    )
    d = 2 ** len(qubits)
    alpha_ref = reference.fit.params["alpha"]
    alpha_int = interleaved.fit.params["alpha"]
    ratio = alpha_int / alpha_ref
    r_target = (d - 1) * (1.0 - ratio) / d
    sigma = (
        (d - 1)
        / d
        * abs(ratio)
        * float(
            np.hypot(
                reference.fit.stderr["alpha"] / alpha_ref,
                interleaved.fit.stderr["alpha"] / alpha_int,
            )
        )
    )
    flags = [f"reference_{f}" for f in reference.flags]
    flags += [f"interleaved_{f}" for f in interleaved.flags]
    if r_target < 0:
        flags.append("negative_estimate")
        logger.warning(
            "interleaved estimate r_t=%.3g is negative (alpha_int > alpha_ref); "
            "reported raw",
            r_target,
        )
    return builder.finish(
        values={
            "r_target": float(r_target),
            "r_reference": reference.r,
            "alpha_reference": float(alpha_ref),
            "alpha_interleaved": float(alpha_int),
        },
        uncertainties={
            "r_target": sigma,
            "r_reference": reference.r_stderr,
            "alpha_reference": float(reference.fit.stderr["alpha"]),
            "alpha_interleaved": float(interleaved.fit.stderr["alpha"]),
        },
        series={
            "lengths": list(lengths),
            "reference_mean_survivals": list(reference.mean_survivals),
            "interleaved_mean_survivals": list(interleaved.mean_survivals),
        },
        flags=tuple(flags),
    )


# ---------------------------------------------------------------------------
# cycle benchmarking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CycleBenchOutcome:
    """Cycle-benchmarking result bundle.

    ``f_pm[label][m]`` are parity averages per Pauli string and length,
    ``f_p[label]`` the per-cycle composite-fidelity contributions, and
    ``f_cb`` their mean over the sampled strings.
    """

    pauli_strings: tuple[str, ...]
    lengths: tuple[int, ...]
    randomizations: int
    f_pm: dict[str, dict[int, float]]
    f_pm_stderr: dict[str, dict[int, float]]
    f_p: dict[str, float]
    f_p_stderr: dict[str, float]
    f_cb: float
    f_cb_stderr: float
    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        for label, by_m in self.f_pm.items():
            for m, value in by_m.items():
                if not -1.0 - 1e-9 <= value <= 1.0 + 1e-9:
                    raise ValueError(f"parity average f[{label}][{m}]={value} outside [-1, 1]")
        if not 0.0 <= self.f_cb <= 1.0:
            raise ValueError(f"composite fidelity {self.f_cb} outside [0, 1]")


def _phase_aligned_defect(u: np.ndarray, v: np.ndarray) -> float:
    inner = np.trace(v.conj().T @ u)
    if abs(inner) < 1e-12:
        return float(np.abs(u - v).max())
    phase = inner / abs(inner)
    return float(np.abs(u / phase - v).max())


def _pauli_conjugate(cycle_mat: np.ndarray, label: str, nq: int) -> str:
    """Label of ``G P G^dagger`` (sign dropped; it is a global phase here)."""
    conj = cycle_mat @ pauli_matrix(label) @ cycle_mat.conj().T
    dim = 2**nq
    for cand in pauli_labels(nq):
        overlap = np.trace(pauli_matrix(cand).conj().T @ conj) / dim
        if abs(abs(overlap) - 1.0) < 1e-6:
            return cand
    raise ValueError(f"cycle does not map Pauli {label} to a Pauli string (not Clifford?)")


def _pauli_product(first: str, second: str) -> str:
    """Letterwise product ``second * first`` of Pauli strings, phase dropped."""
    out = []
    for a, b in zip(first, second):
        if a == "I":
            out.append(b)
        elif b == "I" or a == b:
            out.append("I" if a == b else a)
        else:
            out.append(({"X", "Y", "Z"} - {a, b}).pop())
    return "".join(out)


def _add_pauli_layer(circuit: Circuit, label: str) -> None:
    for q, letter in enumerate(label):
        if letter != "I":
            circuit.add(letter.lower(), q)


def _cb_circuit(
    cycle: Circuit,
    conjugate: dict[str, str],
    p_label: str,
    m: int,
    rng: np.random.Generator,
) -> Circuit:
    """One randomized-compiled cycle-benchmarking circuit (without measures).

    Prepares the +1 eigenstate of ``p_label``, applies ``m`` cycle
    applications with merged random Pauli frames, emits the final frame
    correction and undoes the basis layer, so the ideal net action is the
    bare ``cycle`` to the m-th power.
    """
    nq = cycle.num_qubits
    circuit = Circuit(nq)
    for q, letter in enumerate(p_label):
        for name in _EIGEN_PREP[letter]:
            circuit.add(name, q)
    pending = "I" * nq
    for _ in range(m):
        frame = "".join(rng.choice(("I", "X", "Y", "Z"), size=nq))
        _add_pauli_layer(circuit, _pauli_product(pending, frame))
        circuit.extend(cycle.instructions)
        pending = conjugate[frame]
    _add_pauli_layer(circuit, pending)
    for q, letter in enumerate(p_label):
        for name in _EIGEN_UNPREP[letter]:
            circuit.add(name, q)
    return circuit


def _fit_cb_decay(ms: np.ndarray, fs: np.ndarray) -> tuple[float, float, bool]:
    """Fit f(m) = a exp(-b m) + (1 - a) and return (f(1), stderr, converged)."""
    a0 = max(float(1.0 - fs.min()), 1e-4)
    positive = fs > 0
    b0 = 0.01
    if positive.all() and fs.min() < 1.0:
        b0 = max(-float(np.polyfit(ms, np.log(np.clip(fs, 1e-9, None)), 1)[0]), 1e-4)

    def residual(p: np.ndarray) -> np.ndarray:
        a, b = p
        return a * np.exp(-b * ms) + (1.0 - a) - fs

    p, cov, _, converged, _ = _levenberg_marquardt(residual, np.array([a0, b0]))
    a, b = p
    f1 = float(a * np.exp(-b) + 1.0 - a)
    grad = np.array([np.exp(-b) - 1.0, -a * np.exp(-b)])
    sigma = float(np.sqrt(max(grad @ cov @ grad, 0.0)))
    return f1, sigma, converged


def cycle_benchmark(
    backend: Backend,
    cycle: Circuit,
    *,
    pauli_sample_size: int | None = None,
    lengths: tuple[int, ...] = (4, 16),
    randomizations: int = 6,
    shots: int = 600,
    seed: int = 0,
) -> CycleBenchOutcome:
    """Pauli-randomized cycle benchmarking of a Clifford cycle.

    For each sampled Pauli string P the circuit prepares the +1 eigenstate
    layer B(P), applies the cycle ``m`` times, each application dressed with
    a fresh uniform Pauli frame R whose correction ``R' = G R G^dagger`` is
    merged into the next cycle's frame (randomized compiling), so every
    application costs exactly one single-qubit Pauli layer and the dressed
    cycle equals G exactly.  The final correction is emitted after the last
    application, the basis layer is undone, and the P-eigenvalue parity is
    averaged over shots (identity positions always contribute +1).  With
    two lengths the per-cycle
    fidelity is the ratio ``(f_m2 / f_m1)^(1/(m2-m1))``; with more lengths
    an exponential fixed to f(0) = 1 is fitted and evaluated at m = 1.
    The composite fidelity ``f_cb`` is the mean over the sampled strings.

    The cycle must satisfy ``G^m = I`` (up to global phase) for every
    requested length; violations are rejected before any execution.
    """
    nq = cycle.num_qubits
    if len(lengths) < 2:
        raise ValueError("need at least two cycle lengths")
    cycle_mat = cycle.unitary()
    eye = np.eye(2**nq)
    for m in lengths:
        if _phase_aligned_defect(np.linalg.matrix_power(cycle_mat, int(m)), eye) > 1e-9:
            raise ValueError(f"cycle to the power {m} is not the identity")

    all_labels = pauli_labels(nq)
    if pauli_sample_size is None or nq <= 2:
        sampled = all_labels
    else:
        rng = make_rng(child_seed(seed, "cb-paulis"))
        picks = rng.choice(len(all_labels), size=min(pauli_sample_size, len(all_labels)), replace=False)
        sampled = tuple(all_labels[int(i)] for i in sorted(picks))

    conjugate = {lab: _pauli_conjugate(cycle_mat, lab, nq) for lab in all_labels}

    f_pm: dict[str, dict[int, float]] = {}
    f_pm_err: dict[str, dict[int, float]] = {}
    f_p: dict[str, float] = {}
    f_p_err: dict[str, float] = {}
    flags: list[str] = []

    for p_label in sampled:
        mask = 0
        for q, letter in enumerate(p_label):
            if letter != "I":
                mask |= 1 << (nq - 1 - q)
        signs = _parity_signs(mask, nq)
        f_pm[p_label] = {}
        f_pm_err[p_label] = {}
        for m in lengths:
            per_rand: list[float] = []
            for l in range(randomizations):
                rng = make_rng(child_seed(seed, "cb-frames", p_label, m, l))
                circuit = _cb_circuit(cycle, conjugate, p_label, int(m), rng)
                for q in range(nq):
                    circuit.measure(q, q)
                result = backend.run(
                    circuit, shots, seed=child_seed(seed, "cb-run", p_label, m, l)
                )
                vec = _counts_vector(result.counts, nq, result.shots)
                per_rand.append(float(signs @ vec))
            f_pm[p_label][int(m)] = float(np.mean(per_rand))
            f_pm_err[p_label][int(m)] = float(
                np.std(per_rand, ddof=1) / np.sqrt(len(per_rand))
            ) if len(per_rand) > 1 else 0.0

        if len(lengths) == 2:
            m1, m2 = sorted(int(m) for m in lengths)
            f1, f2 = f_pm[p_label][m1], f_pm[p_label][m2]
            if f1 <= 0 or f2 <= 0:
                flags.append(f"nonpositive_parity_{p_label}")
                f_p[p_label] = 0.0
                f_p_err[p_label] = 1.0
            else:
                val = (f2 / f1) ** (1.0 / (m2 - m1))
                rel = np.hypot(f_pm_err[p_label][m1] / f1, f_pm_err[p_label][m2] / f2)
                f_p[p_label] = float(val)
                f_p_err[p_label] = float(abs(val) * rel / (m2 - m1))
        else:
            ms = np.array(sorted(int(m) for m in lengths), dtype=float)
            fs = np.array([f_pm[p_label][int(m)] for m in ms])
            val, sigma, converged = _fit_cb_decay(ms, fs)
            if not converged:
                flags.append(f"fit_not_converged_{p_label}")
            f_p[p_label] = val
            f_p_err[p_label] = sigma

    clipped = {lab: min(max(v, -1.0), 1.0) for lab, v in f_p.items()}
    if clipped != f_p:
        flags.append("f_p_clipped")
    raw_mean = float(np.mean(list(clipped.values())))
    f_cb = min(max(raw_mean, 0.0), 1.0)
    if f_cb != raw_mean:
        flags.append("f_cb_clipped")
    f_cb_err = float(np.sqrt(np.sum(np.array(list(f_p_err.values())) ** 2))) / len(f_p)

    return CycleBenchOutcome(
        pauli_strings=tuple(sampled),
        lengths=tuple(int(m) for m in lengths),
        randomizations=randomizations,
        f_pm=f_pm,
        f_pm_stderr=f_pm_err,
        f_p=clipped,
        f_p_stderr=f_p_err,
        f_cb=f_cb,
        f_cb_stderr=f_cb_err,
        flags=tuple(flags),
    )


# ---------------------------------------------------------------------------
# over/under-rotation
# ---------------------------------------------------------------------------

_AXIS_SETUP = {
    # axis -> (prep gates, unprep gates, cross-state inverse-prep gates)
    # The cross state is u x psi on the Bloch sphere: landing on it after the
    # first equilibrium crossing marks an over-rotation.
    "x": ((), (), ("s", "h")),
    "y": ((), (), ("h",)),
    "z": (("h",), ("h",), ("sdg", "h")),
}


def _rotation_gate(axis: str, n_per_pseudoid: int, qubit: int) -> Instruction:
    angle = 2.0 * np.pi / n_per_pseudoid
    if axis == "x" and n_per_pseudoid == 4:
        return Instruction("rx90", (qubit,))
    return Instruction("r" + axis, (qubit,), (angle,))


def rotation_error(
    backend: Backend,
    *,
    axis: str = "x",
    n_per_pseudoid: int = 4,
    m_grid: tuple[int, ...] | None = None,
    shots: int = 1500,
    qubit: int = 0,
    seed: int = 0,
) -> MetricReport:
    """Rotation-angle error of a single-qubit 2*pi/n rotation gate.

    The gate is applied ``n * m`` times (``m`` pseudo-identities) on a state
    orthogonal to its axis; the return probability oscillates as
    ``1/2 + a + (1 - b)/2 * exp(-lambda m) cos(m omega)`` where ``omega`` is
    the net angle error per pseudo-identity.  The reported ``theta_err`` is
    ``omega / n`` (per gate application).  A follow-up run at the first
    equilibrium crossing, measured against the axis-cross-prep-state, gives
    the sign: P(0) above one half means over-rotation.  When no oscillation
    is resolvable within the decay window, only an upper bound on the
    detectable angle is reported.
    """
    if axis not in _AXIS_SETUP:
        raise ValueError("axis must be one of 'x', 'y', 'z'")
    if n_per_pseudoid < 2:
        raise ValueError("need at least 2 applications per pseudo-identity")
    if m_grid is None:
        m_grid = tuple(range(0, 101, 2))
    if len(m_grid) < 5:
        raise ValueError("need at least 5 pseudo-identity counts")
    config = {
        "axis": axis,
        "n_per_pseudoid": n_per_pseudoid,
        "m_grid": list(m_grid),
        "shots": shots,
        "qubit": qubit,
    }
    builder = open_report("rotation_error", backend, config, seed)
    prep, unprep, cross_unprep = _AXIS_SETUP[axis]
    gate = _rotation_gate(axis, n_per_pseudoid, qubit)

    p0: list[float] = []
    for idx, m in enumerate(m_grid):
        circuit = Circuit(qubit + 1)
        for name in prep:
            circuit.add(name, qubit)
        for _ in range(int(m) * n_per_pseudoid):
            circuit.append(gate)
        for name in unprep:
            circuit.add(name, qubit)
        circuit.measure(qubit, 0)
        result = backend.run(circuit, shots, seed=child_seed(seed, "rot", idx))
        p0.append(result.counts.get("0", 0) / shots)

    series = {"m": list(m_grid), "p0": p0, "shots": shots}
    fit = fit_damped_cosine(np.array(m_grid, dtype=float), np.array(p0), fix_phase=0.0)
    omega = abs(fit.params["omega"])
    span = float(max(m_grid) - min(m_grid))

    if "no_oscillation" in fit.flags or omega * span < np.pi:
        bound = np.pi / span / n_per_pseudoid
        return builder.finish(
            values={
                "theta_err_rad": 0.0,
                "theta_err_bound_rad": float(bound),
                "theta_err_per_pseudoid_rad": 0.0,
                "sign": None,
            },
            uncertainties={"theta_err_rad": float(bound)},
            fit=fit,
            series=series,
            flags=("below_detection_bound",),
        )

    m_eq = max(int(round(np.pi / (2.0 * omega))), 1)
    circuit = Circuit(qubit + 1)
    for name in prep:
        circuit.add(name, qubit)
    for _ in range(m_eq * n_per_pseudoid):
        circuit.append(gate)
    for name in cross_unprep:
        circuit.add(name, qubit)
    circuit.measure(qubit, 0)
    result = backend.run(circuit, shots, seed=child_seed(seed, "rot-sign"))
    p_phi = result.counts.get("0", 0) / shots
    sign = "over" if p_phi > 0.5 else "under"

    theta = float(omega / n_per_pseudoid)
    sigma = float(fit.stderr["omega"] / n_per_pseudoid)
    series["m_eq"] = m_eq
    series["p_phi"] = p_phi
    return builder.finish(
        values={
            "theta_err_rad": theta,
            "theta_err_per_pseudoid_rad": float(omega),
            "sign": sign,
            "p_phi": float(p_phi),
            "m_eq": m_eq,
        },
        uncertainties={"theta_err_rad": sigma, "theta_err_per_pseudoid_rad": float(fit.stderr["omega"])},
        fit=fit,
        series=series,
    )


# ---------------------------------------------------------------------------
# SPAM and readout fidelity
# ---------------------------------------------------------------------------


def spam_and_readout_fidelity(
    backend: Backend,
    shots: int = 6000,
    *,
    qubit: int = 0,
    seed: int = 0,
) -> MetricReport:
    """Readout fidelity plus tomography-based SPAM estimates for one qubit.

    ``f_r = P(0|0) + P(1|1)`` comes from the two computational-basis
    preparation runs and deliberately keeps the sums-to-two convention (a
    perfect readout scores 2.0).  ``f_rho_init`` is the overlap <0|rho|0> of
    the state-tomography estimate of the initial state, and ``f_meas`` the
    mean overlap of the estimated measurement operators with the ideal
    projectors, both assuming near-ideal basis-change gates (their error
    folds into the estimate).
    """
    config = {"qubit": qubit, "shots": shots}
    builder = open_report("spam_readout", backend, config, seed)
    width = qubit + 1

    # readout fidelity from the two basis preparations
    probs: dict[str, float] = {}
    for label, gates in (("0", ()), ("1", ("x",))):
        circuit = Circuit(width)
        for name in gates:
            circuit.add(name, qubit)
        circuit.measure(qubit, 0)
        result = backend.run(circuit, shots, seed=child_seed(seed, "readout", label))
        probs[label] = result.counts.get(label, 0) / shots
    f_r = probs["0"] + probs["1"]
    f_r_err = float(
        np.sqrt(sum(max(p * (1 - p), 0.25 / shots) / shots for p in probs.values()))
    )

    # state tomography of the initial state (no preparation gates at all)
    bloch: dict[str, float] = {}
    bloch_var: dict[str, float] = {}
    for letter in "XYZ":
        circuit = Circuit(width)
        for name in _BASIS_GATES[letter]:
            circuit.add(name, qubit)
        circuit.measure(qubit, 0)
        result = backend.run(circuit, shots, seed=child_seed(seed, "state-tomo", letter))
        p_zero = result.counts.get("0", 0) / shots
        expv = 2.0 * p_zero - 1.0
        bloch[letter] = expv
        bloch_var[letter] = (1.0 - min(expv**2, 1.0) + 0.25 / shots) / shots
    f_rho_init = (1.0 + bloch["Z"]) / 2.0
    f_rho_err = float(np.sqrt(bloch_var["Z"]) / 2.0)
    r_norm = float(np.sqrt(sum(v**2 for v in bloch.values())))
    flags = []
    if r_norm > 1.0 + 3.0 * float(np.sqrt(max(bloch_var.values()))):
        flags.append("nonphysical_state_estimate")

    # measurement tomography over the IC preparation set, assuming the
    # preparations themselves: p(0 | prep k) = Tr[M0 rho_k]
    gram = np.zeros((4, 4))
    p_given_prep = np.zeros(4)
    var_given_prep = np.zeros(4)
    labels1 = pauli_labels(1)
    for k, prep in enumerate(PREP_LABELS):
        circuit = Circuit(width)
        for name, params in _PREP_GATES[prep]:
            circuit.add(name, qubit, params=params)
        circuit.measure(qubit, 0)
        result = backend.run(circuit, shots, seed=child_seed(seed, "meas-tomo", prep))
        p = result.counts.get("0", 0) / shots
        p_given_prep[k] = p
        var_given_prep[k] = max(p * (1 - p), 0.25 / shots) / shots
        rho = _prep_state(prep)
        for j, lab in enumerate(labels1):
            gram[j, k] = np.real(np.trace(pauli_matrix(lab) @ rho))
    coeff = np.linalg.solve(gram.T, p_given_prep)
    m0 = sum(c * pauli_matrix(lab) for c, lab in zip(coeff, labels1))
    m1 = np.eye(2) - m0
    f_meas = float((m0[0, 0].real + m1[1, 1].real) / 2.0)
    back = np.linalg.inv(gram.T)
    # <0|M0|0> = coeff . [Tr P_j |0><0|] , and <1|M1|1> depends on the same draws
    w0 = np.array([np.real(np.trace(pauli_matrix(lab) @ _prep_state("0"))) for lab in labels1])
    w1 = np.array([np.real(np.trace(pauli_matrix(lab) @ _prep_state("1"))) for lab in labels1])
    jac = 0.5 * (w0 - w1) @ back  # d f_meas / d p_given_prep
    f_meas_err = float(np.sqrt(np.sum(jac**2 * var_given_prep)))

    return builder.finish(
        values={
            "f_r": float(f_r),
            "f_rho_init": float(f_rho_init),
            "f_meas": f_meas,
        },
        uncertainties={
            "f_r": f_r_err,
            "f_rho_init": f_rho_err,
            "f_meas": f_meas_err,
        },
        series={
            "p_correct": {k: float(v) for k, v in probs.items()},
            "bloch": {k: float(v) for k, v in bloch.items()},
            "m0_diag": [float(m0[0, 0].real), float(m0[1, 1].real)],
            "p_zero_by_prep": [float(v) for v in p_given_prep],
        },
        flags=tuple(flags),
    )
