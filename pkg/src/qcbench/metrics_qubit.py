"""Single-qubit quality metrics: T1, Ramsey T2*, Hahn-echo T2, purity oscillation.

All four experiments share the same shape: prepare a state, let the qubit
idle for a swept delay (realized as repeated native ``i`` gates, so delays
are quantized to the idle-gate duration), rotate back, measure, and fit the
probability series.

* T1 — prepare |1>, idle for t, measure.  Fit ``p1(t) = A exp(-t/T1) + B``.
* T2* (Ramsey) — Rx(pi/2), idle, Rx(pi/2), measure.  A deliberate detuning
  is applied as a virtual Rz(delta * t) before the second pulse (the
  emulator has no physical frame detuning; the unitary is identical), so the
  series oscillates and the fit ``a exp(-t/T2*) cos(2 pi f t + phi) + b``
  separates slow decay from miscalibration.
* T2 (echo) — as Ramsey with an Rx(pi) halfway through the delay; the final
  state ideally returns to |0>, so ``p0(t) = A exp(-t/T2) + B`` is fitted.
* Purity oscillation — prepare each of {|0>, |+>, |R>}, idle, estimate
  <X>, <Y>, <Z> via basis changes (H for X; S-dagger then H for Y), form the
  purity ``zeta = (1 + <X>^2 + <Y>^2 + <Z>^2) / 2``, and fit
  ``a + b exp(-lambda t) cos(omega t)`` per initial state.  The reported
  ``omega_max`` is the largest fitted frequency, or 0 when every basis is
  flagged as non-oscillating (purely Markovian dynamics).

The purity experiment optionally adds an explicit environment qubit coupled
by ZZ crosstalk: each idle step applies a conditional phase ``theta`` on the
|11> component of (system, environment).  Tracing out the environment makes
the system's purity oscillate at exactly ``theta`` per step, which is the
textbook signature of coherent crosstalk masquerading as non-Markovian
noise.  The coupling gate is declared to the backend as an extra native
zero-duration gate so it adds no extra damping or gate error of its own.

Times are reported both in nanoseconds and in units of the idle-gate
duration ("gate units").
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .circuit import Circuit
from .emulator import Backend
from .fit import FitResult, fit_damped_cosine, fit_exponential
from .noise import GateNoiseSpec, NoiseModel
from .randomness import child_seed
from .reporting import MetricFitError, MetricReport, fit_summary, open_report

__all__ = [
    "DecayExperimentConfig",
    "EnvironmentCoupling",
    "default_delay_grid",
    "uniform_delay_grid",
    "measure_t1",
    "measure_t2_ramsey",
    "measure_t2_echo",
    "measure_purity_oscillation",
    "with_ideal_phase_coupling",
]

logger = logging.getLogger(__name__)

# Envelope decay below this fraction over the whole window is reported as
# "no decay" rather than as an absurdly long time constant.
_FLAT_ENVELOPE_THRESHOLD = 0.02


@dataclass(frozen=True)
class DecayExperimentConfig:
    """Delay sweep for a single-qubit decay/coherence experiment.

    ``delays_ns`` must be non-negative, strictly increasing, and each a
    multiple of ``idle_gate_ns`` (delays are realized as repeated idle
    gates).  ``detuning_rad_per_ns`` is only used by the Ramsey experiment.
    """

    delays_ns: tuple[float, ...]
    shots_per_point: int = 1000
    detuning_rad_per_ns: float = 0.0
    qubit: int = 0
    seed: int = 0
    idle_gate_ns: float = 50.0

    def __post_init__(self) -> None:
        delays = tuple(float(d) for d in self.delays_ns)
        object.__setattr__(self, "delays_ns", delays)
        if len(delays) < 4:
            raise ValueError("need at least 4 delay points to fit")
        if any(d < 0 for d in delays):
            raise ValueError("delays must be non-negative")
        if any(b <= a for a, b in zip(delays, delays[1:])):
            raise ValueError("delay grid must be strictly increasing")
        if self.shots_per_point <= 0:
            raise ValueError("shots_per_point must be positive")
        if self.idle_gate_ns <= 0:
            raise ValueError("idle_gate_ns must be positive")
        if self.qubit < 0:
            raise ValueError("qubit index must be non-negative")
        for d in delays:
            steps = d / self.idle_gate_ns
            if abs(steps - round(steps)) > 1e-6:
                raise ValueError(
                    f"delay {d} ns is not a multiple of the {self.idle_gate_ns} ns idle gate"
                )

    def idle_counts(self) -> tuple[int, ...]:
        return tuple(int(round(d / self.idle_gate_ns)) for d in self.delays_ns)


@dataclass(frozen=True)
class EnvironmentCoupling:
    """ZZ-crosstalk environment for the purity experiment.

    Each idle step applies phase ``exp(i * phase_per_step)`` to the |11>
    component of (system qubit, environment qubit) — i.e. conditional-phase
    crosstalk accumulating at ``phase_per_step`` per idle gate.
    """

    phase_per_step: float
    environment_qubit: int | None = None

    def env_qubit(self, system_qubit: int) -> int:
        if self.environment_qubit is not None:
            if self.environment_qubit == system_qubit:
                raise ValueError("environment qubit must differ from the probed qubit")
            return self.environment_qubit
        return system_qubit + 1


def default_delay_grid(
    timescale_ns: float,
    *,
    points: int = 30,
    idle_gate_ns: float = 50.0,
    max_factor: float = 3.0,
) -> tuple[float, ...]:
    """Log-spaced delay grid out to ``max_factor`` times the timescale.

    Values snap to idle-gate multiples; collisions bump to the next free
    multiple so the grid stays strictly increasing with exactly ``points``
    entries.
    """
    if timescale_ns <= 0 or not np.isfinite(timescale_ns):
        raise ValueError("timescale must be positive and finite")
    t_max = max_factor * timescale_ns
    raw = np.geomspace(idle_gate_ns, t_max, points)
    grid: list[float] = []
    prev = 0
    for value in raw:
        k = max(int(round(value / idle_gate_ns)), prev + 1)
        grid.append(k * idle_gate_ns)
        prev = k
    return tuple(grid)


def uniform_delay_grid(
    t_max_ns: float,
    *,
    points: int = 40,
    idle_gate_ns: float = 50.0,
    include_zero: bool = True,
) -> tuple[float, ...]:
    """Evenly spaced delay grid snapped to idle-gate multiples."""
    if t_max_ns <= 0:
        raise ValueError("t_max must be positive")
    start = 0.0 if include_zero else idle_gate_ns
    raw = np.linspace(start, t_max_ns, points)
    grid: list[float] = []
    prev = -1
    for value in raw:
        k = max(int(round(value / idle_gate_ns)), prev + 1)
        grid.append(k * idle_gate_ns)
        prev = k
    return tuple(grid)


def _check_idle_duration(backend: Backend, config: DecayExperimentConfig) -> None:
    durations = backend.descriptor().durations
    idle = durations.get("i")
    if idle is not None and abs(idle - config.idle_gate_ns) > 1e-9:
        raise ValueError(
            f"config assumes a {config.idle_gate_ns} ns idle gate but the backend "
            f"declares {idle} ns"
        )


def _probability_of(counts: dict[str, int], bit: str, shots: int) -> float:
    return sum(n for key, n in counts.items() if key == bit) / shots


def _idle_block(circuit: Circuit, qubit: int, steps: int) -> None:
    for _ in range(steps):
        circuit.add("i", qubit)


def _fit_or_raise(metric: str, fitter, x, y, series: dict) -> FitResult:
    try:
        return fitter(np.asarray(x), np.asarray(y))
    except Exception as exc:
        raise MetricFitError(f"{metric}: curve fit failed ({exc})", series) from exc


def measure_t1(backend: Backend, config: DecayExperimentConfig) -> MetricReport:
    """Relaxation time from the decay of the excited-state population."""
    _check_idle_duration(backend, config)
    builder = open_report("t1", backend, config, config.seed)
    q = config.qubit
    p1: list[float] = []
    for idx, steps in enumerate(config.idle_counts()):
        circuit = Circuit(q + 1)
        circuit.add("x", q)
        _idle_block(circuit, q, steps)
        circuit.measure(q, 0)
        result = backend.run(
            circuit, config.shots_per_point, seed=child_seed(config.seed, "t1", idx)
        )
        p1.append(_probability_of(result.counts, "1", result.shots))
    series = {
        "delays_ns": list(config.delays_ns),
        "p1": p1,
        "shots_per_point": config.shots_per_point,
    }
    fit = _fit_or_raise("t1", fit_exponential, config.delays_ns, p1, series)
    t1_ns = fit.params["tau"]
    t1_err = fit.stderr["tau"]
    values = {
        "t1_ns": t1_ns,
        "t1_gate_units": t1_ns / config.idle_gate_ns,
    }
    uncertainties = {
        "t1_ns": t1_err,
        "t1_gate_units": t1_err / config.idle_gate_ns,
    }
    return builder.finish(
        values=values,
        uncertainties=uncertainties,
        fit=fit_summary(fit),
        series=series,
        flags=fit.flags,
    )


def _ramsey_circuit(config: DecayExperimentConfig, steps: int, delay_ns: float) -> Circuit:
    q = config.qubit
    circuit = Circuit(q + 1)
    circuit.rx90(q)
    _idle_block(circuit, q, steps)
    phase = config.detuning_rad_per_ns * delay_ns
    if phase:
        circuit.rz(phase, q)
    circuit.rx90(q)
    circuit.measure(q, 0)
    return circuit


def measure_t2_ramsey(backend: Backend, config: DecayExperimentConfig) -> MetricReport:
    """Free-induction dephasing time and detuning frequency.

    Requires the configured detuning to sweep at least three full
    oscillation periods across the delay grid, so slow residual phase drift
    cannot be mistaken for decay.
    """
    _check_idle_duration(backend, config)
    span = config.delays_ns[-1] - config.delays_ns[0]
    if config.detuning_rad_per_ns * span < 3 * 2 * np.pi:
        raise ValueError(
            "detuning must sweep at least 3 oscillation periods over the delay grid"
        )
    builder = open_report("t2_ramsey", backend, config, config.seed)
    p1: list[float] = []
    for idx, (steps, delay) in enumerate(zip(config.idle_counts(), config.delays_ns)):
        circuit = _ramsey_circuit(config, steps, delay)
        result = backend.run(
            circuit, config.shots_per_point, seed=child_seed(config.seed, "ramsey", idx)
        )
        p1.append(_probability_of(result.counts, "1", result.shots))
    series = {
        "delays_ns": list(config.delays_ns),
        "p1": p1,
        "shots_per_point": config.shots_per_point,
    }
    fit = _fit_or_raise("t2_ramsey", fit_damped_cosine, config.delays_ns, p1, series)
    rate = fit.params["lambda"]
    rate_err = fit.stderr["lambda"]
    flags = tuple(fit.flags)
    if rate * span < _FLAT_ENVELOPE_THRESHOLD:
        flags = flags + ("no_decay",)
        t2_star = float("inf")
        t2_err = float("inf")
    else:
        t2_star = 1.0 / rate
        t2_err = rate_err / rate**2
    omega = fit.params["omega"]
    values = {
        "t2_star_ns": t2_star,
        "t2_star_gate_units": t2_star / config.idle_gate_ns,
        "frequency_per_ns": omega / (2 * np.pi),
        "omega_rad_per_ns": omega,
    }
    uncertainties = {
        "t2_star_ns": t2_err,
        "t2_star_gate_units": t2_err / config.idle_gate_ns,
        "frequency_per_ns": fit.stderr["omega"] / (2 * np.pi),
        "omega_rad_per_ns": fit.stderr["omega"],
    }
    return builder.finish(
        values=values,
        uncertainties=uncertainties,
        fit=fit_summary(fit),
        series=series,
        flags=flags,
    )


def measure_t2_echo(backend: Backend, config: DecayExperimentConfig) -> MetricReport:
    """Echo dephasing time: an Rx(pi) pulse refocuses slow phase noise.

    The delay is split evenly around the pi pulse (an odd idle-step count
    splits floor/ceil, a half-step asymmetry that is negligible against the
    fitted timescales).  The final state ideally returns to |0>, so the
    ground-state population decay is fitted.
    """
    _check_idle_duration(backend, config)
    builder = open_report("t2_echo", backend, config, config.seed)
    q = config.qubit
    p0: list[float] = []
    for idx, steps in enumerate(config.idle_counts()):
        first = steps // 2
        circuit = Circuit(q + 1)
        circuit.rx90(q)
        _idle_block(circuit, q, first)
        circuit.add("x", q)
        _idle_block(circuit, q, steps - first)
        circuit.rx90(q)
        circuit.measure(q, 0)
        result = backend.run(
            circuit, config.shots_per_point, seed=child_seed(config.seed, "echo", idx)
        )
        p0.append(_probability_of(result.counts, "0", result.shots))
    series = {
        "delays_ns": list(config.delays_ns),
        "p0": p0,
        "shots_per_point": config.shots_per_point,
    }
    fit = _fit_or_raise("t2_echo", fit_exponential, config.delays_ns, p0, series)
    t2_ns = fit.params["tau"]
    t2_err = fit.stderr["tau"]
    values = {
        "t2_ns": t2_ns,
        "t2_gate_units": t2_ns / config.idle_gate_ns,
    }
    uncertainties = {
        "t2_ns": t2_err,
        "t2_gate_units": t2_err / config.idle_gate_ns,
    }
    return builder.finish(
        values=values,
        uncertainties=uncertainties,
        fit=fit_summary(fit),
        series=series,
        flags=fit.flags,
    )


_PREPS = ("0", "plus", "r")
_BASES = ("x", "y", "z")

ENV_COUPLING_GATE = "cp"


def with_ideal_phase_coupling(model: NoiseModel) -> NoiseModel:
    """Extend a noise model so ``cp`` runs natively, instantly, noiselessly.

    This is how the environment-coupling step is injected: the conditional
    phase executes as part of the model (like the virtual ``rz``) rather
    than being compiled into noisy cx gates, mirroring a crosstalk term in
    the underlying Hamiltonian rather than an applied gate.
    """
    if ENV_COUPLING_GATE in model.gates:
        return model
    gates = dict(model.gates)
    gates[ENV_COUPLING_GATE] = GateNoiseSpec(duration=0.0)
    return replace(model, gates=gates)


def _purity_circuit(
    config: DecayExperimentConfig,
    prep: str,
    basis: str,
    steps: int,
    environment: EnvironmentCoupling | None,
) -> Circuit:
    q = config.qubit
    env = environment.env_qubit(q) if environment is not None else None
    width = q + 1 if env is None else max(q, env) + 1
    circuit = Circuit(width)
    if prep == "plus":
        circuit.add("h", q)
    elif prep == "r":
        circuit.add("h", q)
        circuit.add("s", q)
    elif prep != "0":
        raise ValueError(f"unknown preparation {prep!r}")
    if env is not None:
        circuit.add("h", env)
        for _ in range(steps):
            circuit.add("i", q)
            circuit.add("i", env)
            circuit.add(ENV_COUPLING_GATE, q, env, params=(environment.phase_per_step,))
    else:
        _idle_block(circuit, q, steps)
    if basis == "x":
        circuit.add("h", q)
    elif basis == "y":
        circuit.add("sdg", q)
        circuit.add("h", q)
    elif basis != "z":
        raise ValueError(f"unknown basis {basis!r}")
    circuit.measure(q, 0)
    return circuit


def measure_purity_oscillation(
    backend: Backend,
    config: DecayExperimentConfig,
    *,
    environment: EnvironmentCoupling | None = None,
) -> MetricReport:
    """Idle-qubit purity oscillation frequency (non-Markovianity witness).

    Reports the per-preparation fitted frequencies and their maximum, in
    radians per nanosecond and per idle step.  A preparation whose fit is
    flagged non-oscillating contributes frequency 0.
    """
    _check_idle_duration(backend, config)
    if environment is not None and ENV_COUPLING_GATE not in getattr(
        backend.descriptor(), "native_gates", (ENV_COUPLING_GATE,)
    ):
        raise ValueError(
            "backend does not execute the environment coupling gate natively; "
            "extend its model with with_ideal_phase_coupling()"
        )
    builder = open_report("purity_oscillation", backend, config, config.seed)
    delays = np.asarray(config.delays_ns)
    zeta: dict[str, list[float]] = {}
    expectations: dict[str, dict[str, list[float]]] = {}
    for prep in _PREPS:
        zeta[prep] = []
        expectations[prep] = {b: [] for b in _BASES}
        for idx, steps in enumerate(config.idle_counts()):
            r_squared = 0.0
            for basis in _BASES:
                circuit = _purity_circuit(config, prep, basis, steps, environment)
                result = backend.run(
                    circuit,
                    config.shots_per_point,
                    seed=child_seed(config.seed, "purity", prep, basis, idx),
                )
                p0 = _probability_of(result.counts, "0", result.shots)
                expval = 2.0 * p0 - 1.0
                expectations[prep][basis].append(expval)
                r_squared += expval**2
            zeta[prep].append(0.5 * (1.0 + r_squared))

    fits: dict[str, FitResult] = {}
    omegas: dict[str, float] = {}
    flags: list[str] = []
    for prep in _PREPS:
        series = {"delays_ns": list(delays), "zeta": zeta[prep], "prep": prep}
        fit = _fit_or_raise(
            "purity_oscillation",
            lambda x, y: fit_damped_cosine(x, y, fix_phase=0.0),
            delays,
            zeta[prep],
            series,
        )
        fits[prep] = fit
        if "no_oscillation" in fit.flags:
            omegas[prep] = 0.0
            flags.append(f"no_oscillation_{prep}")
        else:
            omegas[prep] = abs(fit.params["omega"])
    omega_max = max(omegas.values())
    step = config.idle_gate_ns
    values = {
        "omega_max_rad_per_ns": omega_max,
        "omega_max_rad_per_step": omega_max * step,
    }
    for prep in _PREPS:
        values[f"omega_{prep}_rad_per_step"] = omegas[prep] * step
    uncertainties = {}
    for prep in _PREPS:
        err = fits[prep].stderr.get("omega", 0.0) if omegas[prep] else 0.0
        uncertainties[f"omega_{prep}_rad_per_step"] = err * step
    return builder.finish(
        values=values,
        uncertainties=uncertainties,
        fit={prep: fit_summary(fits[prep]) for prep in _PREPS},
        series={
            "delays_ns": list(delays),
            "zeta": zeta,
            "expectations": expectations,
            "shots_per_point": config.shots_per_point,
        },
        flags=tuple(flags),
    )
