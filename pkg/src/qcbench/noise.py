"""Noise model: qubit relaxation parameters, per-gate channels, drift schedules.

All times are in nanoseconds.  A :class:`NoiseModel` fully determines the
noisy backend: per-qubit ``T1``/``T2`` and readout confusion, a
:class:`GateNoiseSpec` for every native gate kind (duration, coherent error
rotations applied after the ideal gate, depolarizing rate), measurement and
reset durations, plus optional :class:`DriftSchedule` entries that make
parameters functions of virtual time (evaluated with :func:`evaluate_at`).

The reference model (:func:`build_reference_model`) draws ``T1 ~
Normal(50us, 1us)`` and ``T2 ~ Normal(70us, 1us)`` per qubit with a
deterministic inverse-CDF sampler, uses durations I=50ns, Rx(pi/2)=50ns,
CX=300ns, measurement=1000ns, keeps Rz virtual and noiseless, and attaches
over-rotation pi/100 about x + phase error pi/120 about z + depolarizing
5e-4 to Rx(pi/2), and ZX/ZZ rotations of pi/100 + depolarizing 5e-3 to CX.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from .qmath import KrausChannel, pauli_basis, pauli_matrix
from .randomness import make_rng, normal_from_uniform

__all__ = [
    "QubitNoiseParams",
    "CoherentRotation",
    "GateNoiseSpec",
    "DriftSchedule",
    "NoiseModel",
    "damping_channel",
    "depolarizing_channel",
    "build_reference_model",
    "build_noiseless_model",
    "evaluate_at",
]

logger = logging.getLogger(__name__)

NATIVE_GATE_KINDS = ("i", "rx90", "rz", "cx")

T1_MEAN_NS = 50_000.0
T1_STD_NS = 1_000.0
T2_MEAN_NS = 70_000.0
T2_STD_NS = 1_000.0
IDLE_DURATION_NS = 50.0
RX90_DURATION_NS = 50.0
CX_DURATION_NS = 300.0
MEASUREMENT_DURATION_NS = 1_000.0
DEFAULT_RESET_DURATION_NS = 500.0
RX90_OVERROTATION_RAD = np.pi / 100
RX90_PHASE_ERROR_RAD = np.pi / 120
RX90_DEPOLARIZING = 5e-4
CX_ZX_ANGLE_RAD = np.pi / 100
CX_ZZ_ANGLE_RAD = np.pi / 100
CX_DEPOLARIZING = 5e-3

_IDENTITY_CONFUSION = ((1.0, 0.0), (0.0, 1.0))


@dataclass(frozen=True)
class QubitNoiseParams:
    """Relaxation/dephasing times (ns) and readout confusion for one qubit.

    ``readout_confusion[i][j]`` is the probability of *reporting* ``j`` when
    the pre-measurement state is ``|i>``; rows must sum to one.
    """

    t1: float
    t2: float
    readout_confusion: tuple[tuple[float, float], tuple[float, float]] = _IDENTITY_CONFUSION

    def __post_init__(self) -> None:
        object.__setattr__(self, "t1", float(self.t1))
        object.__setattr__(self, "t2", float(self.t2))
        if self.t1 <= 0 or self.t2 <= 0:
            raise ValueError("t1 and t2 must be positive")
        if self.t2 > 2 * self.t1 + 1e-9:
            raise ValueError(f"unphysical dephasing time: t2={self.t2} > 2*t1={2 * self.t1}")
        conf = tuple(tuple(float(v) for v in row) for row in self.readout_confusion)
        object.__setattr__(self, "readout_confusion", conf)
        for row in conf:
            if len(row) != 2 or any(v < 0 or v > 1 for v in row):
                raise ValueError("confusion entries must be probabilities")
            if abs(sum(row) - 1.0) > 1e-12:
                raise ValueError("confusion rows must sum to 1")

    @property
    def confusion_matrix(self) -> np.ndarray:
        return np.array(self.readout_confusion, dtype=float)

    @property
    def has_readout_error(self) -> bool:
        return self.readout_confusion != _IDENTITY_CONFUSION


@dataclass(frozen=True)
class CoherentRotation:
    """Unitary error ``exp(-i angle/2 P)`` about a Pauli-string ``axis``."""

    axis: str
    angle: float

    def __post_init__(self) -> None:
        if not self.axis or any(ch not in "IXYZ" for ch in self.axis):
            raise ValueError(f"invalid Pauli axis {self.axis!r}")

    @property
    def num_qubits(self) -> int:
        return len(self.axis)

    def unitary(self) -> np.ndarray:
        p = pauli_matrix(self.axis)
        d = p.shape[0]
        half = self.angle / 2
        return np.cos(half) * np.eye(d, dtype=np.complex128) - 1j * np.sin(half) * p


@dataclass(frozen=True)
class GateNoiseSpec:
    """Duration and post-gate noise attached to one native gate kind."""

    duration: float
    coherent_rotations: tuple[CoherentRotation, ...] = ()
    depolarizing_gamma: float = 0.0

    def __post_init__(self) -> None:
        if self.duration < 0:
            raise ValueError("duration must be >= 0")
        if not 0 <= self.depolarizing_gamma <= 1:
            raise ValueError("depolarizing gamma must be in [0, 1]")
        object.__setattr__(self, "coherent_rotations", tuple(self.coherent_rotations))

    @property
    def is_noiseless(self) -> bool:
        return not self.coherent_rotations and self.depolarizing_gamma == 0.0

    def error_unitary(self, num_qubits: int) -> np.ndarray | None:
        """Combined coherent error (listing order, first listed acts first)."""
        if not self.coherent_rotations:
            return None
        dim = 2**num_qubits
        u = np.eye(dim, dtype=np.complex128)
        for rot in self.coherent_rotations:
            if rot.num_qubits != num_qubits:
                raise ValueError("coherent rotation arity does not match gate arity")
            u = rot.unitary() @ u
        return u


@dataclass(frozen=True)
class DriftSchedule:
    """Virtual-time dependence of one scalar model parameter.

    ``target`` is a dotted path ``qubits.<index>.<t1|t2>``.  Modes:

    - ``constant``: no change (explicit no-op),
    - ``linear``: value += ``rate`` * t   (rate in parameter units per ns),
    - ``gaussian_jitter``: value += sigma * z(t) with z a deterministic
      standard-normal draw keyed on (model seed, target, t),
    - ``telegraph``: value jumps to ``jump_value`` at ``jump_time`` and stays.

    Only active for ``domain_start <= t < domain_end``.
    """

    target: str
    mode: str
    rate: float = 0.0
    sigma: float = 0.0
    jump_time: float = 0.0
    jump_value: float = 0.0
    domain_start: float = 0.0
    domain_end: float = float("inf")

    def __post_init__(self) -> None:
        if self.mode not in ("constant", "linear", "gaussian_jitter", "telegraph"):
            raise ValueError(f"unknown drift mode {self.mode!r}")
        parts = self.target.split(".")
        if len(parts) != 3 or parts[0] != "qubits" or parts[2] not in ("t1", "t2"):
            raise ValueError(
                f"drift target must look like 'qubits.<i>.<t1|t2>', got {self.target!r}"
            )
        int(parts[1])  # must parse

    @property
    def qubit(self) -> int:
        return int(self.target.split(".")[1])

    @property
    def parameter(self) -> str:
        return self.target.split(".")[2]

    def apply(self, base_value: float, virtual_time: float, seed: int) -> float:
        if not (self.domain_start <= virtual_time < self.domain_end):
            return base_value
        if self.mode == "constant":
            return base_value
        if self.mode == "linear":
            return base_value + self.rate * virtual_time
        if self.mode == "gaussian_jitter":
            rng = make_rng(seed, "drift", self.target, float(virtual_time))
            return base_value + self.sigma * normal_from_uniform(rng)
        # telegraph
        return self.jump_value if virtual_time >= self.jump_time else base_value


@dataclass(frozen=True)
class NoiseModel:
    """Immutable full description of the noisy device."""

    qubits: tuple[QubitNoiseParams, ...]
    gates: Mapping[str, GateNoiseSpec]
    measurement_duration: float = MEASUREMENT_DURATION_NS
    reset_duration: float = DEFAULT_RESET_DURATION_NS
    seed: int = 0
    drift: tuple[DriftSchedule, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "qubits", tuple(self.qubits))
        object.__setattr__(self, "gates", dict(self.gates))
        object.__setattr__(self, "drift", tuple(self.drift))
        if not self.qubits:
            raise ValueError("model needs at least one qubit")
        missing = [k for k in NATIVE_GATE_KINDS if k not in self.gates]
        if missing:
            raise ValueError(f"missing gate noise specs for {missing}")
        for sched in self.drift:
            if sched.qubit >= len(self.qubits):
                raise ValueError(f"drift target {sched.target!r} out of range")

    @property
    def num_qubits(self) -> int:
        return len(self.qubits)

    @property
    def has_readout_error(self) -> bool:
        return any(q.has_readout_error for q in self.qubits)

    def digest(self) -> str:
        """Short stable content hash of the model configuration."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    # -- serialization -------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "measurement_duration": self.measurement_duration,
            "reset_duration": self.reset_duration,
            "qubits": [
                {
                    "t1": q.t1,
                    "t2": q.t2,
                    "readout_confusion": [list(row) for row in q.readout_confusion],
                }
                for q in self.qubits
            ],
            "gates": {
                name: {
                    "duration": spec.duration,
                    "coherent_rotations": [
                        {"axis": r.axis, "angle": r.angle} for r in spec.coherent_rotations
                    ],
                    "depolarizing_gamma": spec.depolarizing_gamma,
                }
                for name, spec in sorted(self.gates.items())
            },
            "drift": [
                {
                    "target": s.target,
                    "mode": s.mode,
                    "rate": s.rate,
                    "sigma": s.sigma,
                    "jump_time": s.jump_time,
                    "jump_value": s.jump_value,
                    "domain_start": s.domain_start,
                    "domain_end": "inf" if s.domain_end == float("inf") else s.domain_end,
                }
                for s in self.drift
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "NoiseModel":
        qubits = tuple(
            QubitNoiseParams(
                t1=q["t1"],
                t2=q["t2"],
                readout_confusion=tuple(tuple(row) for row in q.get("readout_confusion", _IDENTITY_CONFUSION)),
            )
            for q in data["qubits"]
        )
        gates = {
            name: GateNoiseSpec(
                duration=g["duration"],
                coherent_rotations=tuple(
                    CoherentRotation(r["axis"], r["angle"])
                    for r in g.get("coherent_rotations", ())
                ),
                depolarizing_gamma=g.get("depolarizing_gamma", 0.0),
            )
            for name, g in data["gates"].items()
        }
        drift = tuple(
            DriftSchedule(
                target=s["target"],
                mode=s["mode"],
                rate=s.get("rate", 0.0),
                sigma=s.get("sigma", 0.0),
                jump_time=s.get("jump_time", 0.0),
                jump_value=s.get("jump_value", 0.0),
                domain_start=s.get("domain_start", 0.0),
                domain_end=float("inf")
                if s.get("domain_end", "inf") in ("inf", None)
                else float(s["domain_end"]),
            )
            for s in data.get("drift", ())
        )
        return cls(
            qubits=qubits,
            gates=gates,
            measurement_duration=data.get("measurement_duration", MEASUREMENT_DURATION_NS),
            reset_duration=data.get("reset_duration", DEFAULT_RESET_DURATION_NS),
            seed=data.get("seed", 0),
            drift=drift,
        )


def damping_channel(t1: float, t2: float, duration: float) -> KrausChannel:
    """Combined amplitude and phase damping over ``duration`` ns.

    gamma_AD = 1 - exp(-t/T1) and gamma_PD solves
    sqrt((1-gamma_AD)(1-gamma_PD)) = exp(-t/T2), giving the three-operator
    channel whose Pauli transfer matrix has X/Y decay exp(-t/T2), Z decay
    exp(-t/T1) and |0> repumping 1 - exp(-t/T1).
    """
    if t1 <= 0 or t2 <= 0:
        raise ValueError("t1 and t2 must be positive")
    if t2 > 2 * t1 + 1e-9:
        raise ValueError("unphysical dephasing time: t2 > 2*t1")
    if duration < 0:
        raise ValueError("duration must be >= 0")
    if duration == 0:
        return KrausChannel((np.eye(2, dtype=np.complex128),))
    gamma_ad = 1.0 - np.exp(-duration / t1)
    one_minus_pd = np.exp(-2 * duration / t2 + duration / t1)
    gamma_pd = 1.0 - min(one_minus_pd, 1.0)
    k0 = np.array(
        [[1.0, 0.0], [0.0, np.sqrt((1 - gamma_ad) * (1 - gamma_pd))]], dtype=np.complex128
    )
    k1 = np.array([[0.0, np.sqrt(gamma_ad)], [0.0, 0.0]], dtype=np.complex128)
    k2 = np.array(
        [[0.0, 0.0], [0.0, np.sqrt((1 - gamma_ad) * gamma_pd)]], dtype=np.complex128
    )
    return KrausChannel((k0, k1, k2))


def depolarizing_channel(gamma: float, num_qubits: int = 1) -> KrausChannel:
    """Uniform depolarizing channel: identity with prob 1-gamma(4^n-1)/4^n style.

    One qubit: K0 = sqrt(1-3g/4) I and sqrt(g/4) X, Y, Z; two qubits extend
    uniformly over the 15 non-identity Pauli pairs, so the identity-process
    fidelity is 1 - 15g/16.
    """
    if not 0 <= gamma <= 1:
        raise ValueError("gamma must be in [0, 1]")
    if num_qubits not in (1, 2):
        raise ValueError("depolarizing channel supports 1 or 2 qubits")
    dim4 = 4**num_qubits
    basis = pauli_basis(num_qubits)
    ops = [np.sqrt(1 - (dim4 - 1) * gamma / dim4) * basis[0]]
    ops.extend(np.sqrt(gamma / dim4) * p for p in basis[1:])
    return KrausChannel(tuple(ops))


def build_reference_model(
    seed: int,
    num_qubits: int = 5,
    *,
    reset_duration: float = DEFAULT_RESET_DURATION_NS,
    drift: tuple[DriftSchedule, ...] = (),
) -> NoiseModel:
    """Reference all-to-all model with per-qubit T1/T2 draws keyed on ``seed``."""
    if num_qubits < 1:
        raise ValueError("num_qubits must be >= 1")
    qubits = []
    for q in range(num_qubits):
        t1 = T1_MEAN_NS + T1_STD_NS * normal_from_uniform(make_rng(seed, "t1", q))
        t2 = T2_MEAN_NS + T2_STD_NS * normal_from_uniform(make_rng(seed, "t2", q))
        qubits.append(QubitNoiseParams(t1=t1, t2=t2))
    gates = {
        "i": GateNoiseSpec(duration=IDLE_DURATION_NS),
        "rz": GateNoiseSpec(duration=0.0),
        "rx90": GateNoiseSpec(
            duration=RX90_DURATION_NS,
            coherent_rotations=(
                CoherentRotation("X", RX90_OVERROTATION_RAD),
                CoherentRotation("Z", RX90_PHASE_ERROR_RAD),
            ),
            depolarizing_gamma=RX90_DEPOLARIZING,
        ),
        "cx": GateNoiseSpec(
            duration=CX_DURATION_NS,
            coherent_rotations=(
                CoherentRotation("ZX", CX_ZX_ANGLE_RAD),
                CoherentRotation("ZZ", CX_ZZ_ANGLE_RAD),
            ),
            depolarizing_gamma=CX_DEPOLARIZING,
        ),
    }
    return NoiseModel(
        qubits=tuple(qubits),
        gates=gates,
        measurement_duration=MEASUREMENT_DURATION_NS,
        reset_duration=reset_duration,
        seed=seed,
        drift=tuple(drift),
    )


def build_noiseless_model(num_qubits: int, seed: int = 0) -> NoiseModel:
    """Noise-free model with the standard durations (for ideal-output oracles).

    Infinite T1/T2 make every damping channel exactly the identity, and no
    gate carries coherent or depolarizing errors, so execution matches
    statevector simulation while the duration ledger stays meaningful.
    """
    inf = float("inf")
    qubits = tuple(QubitNoiseParams(t1=inf, t2=inf) for _ in range(num_qubits))
    gates = {
        "i": GateNoiseSpec(duration=IDLE_DURATION_NS),
        "rz": GateNoiseSpec(duration=0.0),
        "rx90": GateNoiseSpec(duration=RX90_DURATION_NS),
        "cx": GateNoiseSpec(duration=CX_DURATION_NS),
    }
    return NoiseModel(qubits=qubits, gates=gates, seed=seed)


def evaluate_at(model: NoiseModel, virtual_time: float) -> NoiseModel:
    """Snapshot of ``model`` with every drift schedule applied at ``virtual_time``.

    Pure: the same (model, time) pair always yields the same snapshot.  The
    snapshot carries no drift schedules.  If drifted values violate
    ``t2 <= 2*t1`` the t2 value is clipped (and the clip logged).
    """
    if virtual_time < 0:
        raise ValueError("virtual_time must be >= 0")
    if not model.drift:
        return replace(model, drift=())
    values: dict[tuple[int, str], float] = {}
    for q, params in enumerate(model.qubits):
        values[(q, "t1")] = params.t1
        values[(q, "t2")] = params.t2
    for sched in model.drift:
        key = (sched.qubit, sched.parameter)
        values[key] = sched.apply(values[key], virtual_time, model.seed)
    new_qubits = []
    for q, params in enumerate(model.qubits):
        t1 = values[(q, "t1")]
        t2 = values[(q, "t2")]
        if t1 <= 0:
            raise ValueError(f"drift made t1 of qubit {q} non-positive at t={virtual_time}")
        if t2 > 2 * t1:
            logger.warning(
                "drift clipped t2 of qubit %d from %.1f to %.1f ns at t=%.1f",
                q, t2, 2 * t1, virtual_time,
            )
            t2 = 2 * t1
        if t2 <= 0:
            raise ValueError(f"drift made t2 of qubit {q} non-positive at t={virtual_time}")
        new_qubits.append(replace(params, t1=t1, t2=t2))
    return replace(model, qubits=tuple(new_qubits), drift=())
