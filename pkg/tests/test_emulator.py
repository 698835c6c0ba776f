"""Tests for density-matrix execution, scheduling, sampling, and probes."""

import numpy as np
import pytest

from qcbench.circuit import Circuit, embed_unitary, gate_matrix
from qcbench.emulator import (
    Backend,
    BackendDescriptor,
    DensityMatrixBackend,
    ExecutionResult,
    MidcircuitProbe,
    _apply_depolarizing,
    _apply_kraus,
    _apply_unitary,
    _project,
    _trace,
    probe_midcircuit,
    probe_usable_qubits,
)
from qcbench.noise import (
    CoherentRotation,
    DriftSchedule,
    GateNoiseSpec,
    NoiseModel,
    QubitNoiseParams,
    build_noiseless_model,
    build_reference_model,
    damping_channel,
    depolarizing_channel,
)
from qcbench.qmath import haar_random_unitary, validate_density_matrix


def random_density_matrix(nq, seed):
    rng = np.random.default_rng(seed)
    dim = 2**nq
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def as_tensor(rho, nq):
    return rho.reshape((2,) * (2 * nq))


def as_matrix(t, nq):
    return t.reshape(2**nq, 2**nq)


class TestTensorOps:
    @pytest.mark.parametrize("qubits", [(0,), (1,), (2,), (0, 1), (2, 0), (1, 2)])
    def test_apply_unitary_matches_dense_embedding(self, qubits):
        nq = 3
        rng = np.random.default_rng(hash(qubits) % 2**31)
        u = haar_random_unitary(2 ** len(qubits), rng)
        rho = random_density_matrix(nq, 3)
        full = embed_unitary(u, qubits, nq)
        expected = full @ rho @ full.conj().T
        got = as_matrix(_apply_unitary(as_tensor(rho, nq), u, qubits, nq), nq)
        np.testing.assert_allclose(got, expected, atol=1e-12)

    def test_apply_kraus_matches_dense_embedding(self):
        # Single-qubit damping on the middle qubit of three, checked against
        # explicit kron-embedded operators.
        nq = 3
        chan = damping_channel(50_000.0, 70_000.0, 400.0)
        rho = random_density_matrix(nq, 4)
        expected = np.zeros_like(rho)
        for op in chan.ops:
            full = np.kron(np.kron(np.eye(2), op), np.eye(2))
            expected += full @ rho @ full.conj().T
        got = as_matrix(_apply_kraus(as_tensor(rho, nq), chan.ops, (1,), nq), nq)
        np.testing.assert_allclose(got, expected, atol=1e-12)

    @pytest.mark.parametrize("qubits", [(0,), (2,), (0, 1), (2, 0)])
    def test_depolarizing_closed_form_matches_kraus(self, qubits):
        nq = 3
        gamma = 0.23
        rho = random_density_matrix(nq, 5)
        chan = depolarizing_channel(gamma, len(qubits))
        expected = as_matrix(_apply_kraus(as_tensor(rho, nq), chan.ops, qubits, nq), nq)
        got = as_matrix(_apply_depolarizing(as_tensor(rho, nq), gamma, qubits, nq), nq)
        np.testing.assert_allclose(got, expected, atol=1e-12)

    def test_project_and_trace(self):
        nq = 2
        rho = random_density_matrix(nq, 6)
        t = as_tensor(rho, nq)
        p0 = _trace(_project(t, 0, 0, nq), nq)
        p1 = _trace(_project(t, 0, 1, nq), nq)
        assert p0 + p1 == pytest.approx(1.0, abs=1e-12)
        assert p0 == pytest.approx(rho[0, 0].real + rho[1, 1].real, abs=1e-12)


class TestDurationLedger:
    def test_sequential_pulses_plus_measurement(self):
        backend = DensityMatrixBackend(build_reference_model(0, num_qubits=1))
        for k in (1, 3, 8):
            c = Circuit(1)
            for _ in range(k):
                c.rx90(0)
            c.measure(0, 0)
            r = backend.run(c, 4, seed=1)
            assert r.circuit_duration == pytest.approx(k * 50.0 + 1000.0)

    def test_rz_is_free(self):
        backend = DensityMatrixBackend(build_reference_model(0, num_qubits=1))
        c = Circuit(1)
        c.rz(1.0, 0).rx90(0).rz(-0.5, 0).measure(0, 0)
        assert backend.run(c, 4, seed=1).circuit_duration == pytest.approx(1050.0)

    def test_two_qubit_critical_path(self):
        backend = DensityMatrixBackend(build_reference_model(0, num_qubits=2))
        c = Circuit(2)
        c.rx90(0).cx(0, 1).measure_all()
        # rx90 (50) then cx (300) then parallel measures (1000).
        assert backend.run(c, 4, seed=1).circuit_duration == pytest.approx(1350.0)

    def test_barrier_serializes_parallel_gates(self):
        backend = DensityMatrixBackend(build_reference_model(0, num_qubits=2))
        parallel = Circuit(2)
        parallel.rx90(0).rx90(1).measure_all()
        serial = Circuit(2)
        serial.rx90(0).barrier().rx90(1).measure_all()
        assert backend.run(parallel, 4, seed=1).circuit_duration == pytest.approx(1050.0)
        assert backend.run(serial, 4, seed=1).circuit_duration == pytest.approx(1100.0)

    def test_virtual_wall_time_includes_reset(self):
        backend = DensityMatrixBackend(build_reference_model(0, num_qubits=1))
        c = Circuit(1)
        c.rx90(0).measure(0, 0)
        r = backend.run(c, 100, seed=1)
        assert r.virtual_wall_time == pytest.approx(100 * (1050.0 + 500.0))
        assert backend.clock_ns == pytest.approx(r.virtual_wall_time)
        backend.reset_clock()
        assert backend.clock_ns == 0.0

    def test_circuit_duration_helper_matches_run(self):
        backend = DensityMatrixBackend(build_reference_model(0, num_qubits=2))
        c = Circuit(2)
        c.add("h", 0).cx(0, 1).measure_all()
        assert backend.circuit_duration(c) == backend.run(c, 2, seed=0).circuit_duration


class TestAlapScheduling:
    def test_idle_sits_before_late_gates(self):
        # Under as-late-as-possible scheduling a short gate sequence idles in
        # |0> first, so its excited state only sees the measurement window;
        # the marginal must match a lone single-qubit circuit exactly.
        model1 = build_reference_model(2, num_qubits=1)
        model2 = build_reference_model(2, num_qubits=2)
        lone = Circuit(1)
        lone.add("x", 0).measure(0, 0)
        p_lone = DensityMatrixBackend(model1).exact_distribution(lone)["1"]

        busy = Circuit(2)
        busy.add("x", 0)
        for _ in range(20):
            busy.add("i", 1)
        busy.measure_all()
        dist = DensityMatrixBackend(model2).exact_distribution(busy)
        p_marginal = sum(p for k, p in dist.items() if k[0] == "1")
        assert p_marginal == pytest.approx(p_lone, abs=1e-12)

    def test_idle_after_barrier_damps_excited_qubit(self):
        # Excite both qubits, pin the excitation with a barrier, then keep
        # qubit 1 busy: qubit 0 now idles *excited* until the joint end and
        # must decay by exactly exp(-gap/T1).
        model = build_reference_model(2, num_qubits=2)
        t1 = model.qubits[0].t1

        def build(n_pulses):
            c = Circuit(2)
            c.add("x", 0).add("x", 1)
            c.barrier()
            for _ in range(n_pulses):
                c.add("i", 1)
            c.measure_all()
            return c

        backend = DensityMatrixBackend(model)
        dist_short = backend.exact_distribution(build(0))
        dist_long = backend.exact_distribution(build(100))
        p_short = sum(p for k, p in dist_short.items() if k[0] == "1")
        p_long = sum(p for k, p in dist_long.items() if k[0] == "1")
        # 100 idle slots of 50 ns = 5 us of excited-state decay on qubit 0.
        assert p_long < p_short
        assert p_long / p_short == pytest.approx(np.exp(-5000.0 / t1), rel=1e-9)


class TestNoiselessExecution:
    def test_x_gives_one(self):
        backend = DensityMatrixBackend(build_noiseless_model(1))
        c = Circuit(1)
        c.add("x", 0).measure(0, 0)
        assert backend.run(c, 500, seed=3).counts == {"1": 500}

    def test_bell_counts(self):
        backend = DensityMatrixBackend(build_noiseless_model(2))
        c = Circuit(2)
        c.add("h", 0).cx(0, 1).measure_all()
        r = backend.run(c, 2000, seed=5)
        assert set(r.counts) <= {"00", "11"}
        sigma = np.sqrt(0.25 * 2000)
        assert abs(r.counts["00"] - 1000) < 3 * sigma

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_statevector(self, seed):
        rng = np.random.default_rng(seed)
        nq = 3
        gates1 = ["h", "x", "y", "s", "t"]
        c = Circuit(nq)
        for _ in range(14):
            if rng.random() < 0.5:
                c.add(rng.choice(gates1), int(rng.integers(nq)))
            elif rng.random() < 0.7:
                c.add("rx" if rng.random() < 0.5 else "rz",
                      int(rng.integers(nq)), params=(float(rng.uniform(-np.pi, np.pi)),))
            else:
                a, b = rng.choice(nq, size=2, replace=False)
                c.cx(int(a), int(b))
        psi = c.unitary()[:, 0]
        expected = np.abs(psi) ** 2
        c.measure_all()
        dist = DensityMatrixBackend(build_noiseless_model(nq)).exact_distribution(c)
        got = np.zeros(2**nq)
        for key, p in dist.items():
            got[int(key, 2)] = p
        np.testing.assert_allclose(got, expected, atol=1e-10)

    def test_seed_determinism(self):
        backend = DensityMatrixBackend(build_reference_model(1, num_qubits=2))
        c = Circuit(2)
        c.add("h", 0).cx(0, 1).measure_all()
        r1 = backend.run(c, 300, seed=42)
        r2 = DensityMatrixBackend(build_reference_model(1, num_qubits=2)).run(c, 300, seed=42)
        assert r1.counts == r2.counts
        r3 = backend.run(c, 300, seed=43)
        assert r1.counts != r3.counts

    def test_default_seeds_are_deterministic_per_backend(self):
        model = build_reference_model(1, num_qubits=1)
        c = Circuit(1)
        c.add("h", 0).measure(0, 0)
        a = DensityMatrixBackend(model)
        b = DensityMatrixBackend(model)
        assert [a.run(c, 100).counts for _ in range(3)] == [
            b.run(c, 100).counts for _ in range(3)
        ]

    def test_no_measurement_gives_empty_register(self):
        backend = DensityMatrixBackend(build_noiseless_model(1))
        c = Circuit(1)
        c.add("x", 0)
        r = backend.run(c, 50, seed=0)
        assert r.counts == {"": 50}
        assert r.circuit_duration == pytest.approx(100.0)


class TestNoisyExecution:
    def test_density_matrix_stays_valid(self):
        model = build_reference_model(4, num_qubits=3)
        backend = DensityMatrixBackend(model)
        rng = np.random.default_rng(9)
        c = Circuit(3)
        for _ in range(12):
            r = rng.random()
            if r < 0.4:
                a, b = rng.choice(3, size=2, replace=False)
                c.cx(int(a), int(b))
            elif r < 0.7:
                c.add("h", int(rng.integers(3)))
            else:
                c.reset(int(rng.integers(3)))
        rho = backend.final_density_matrix(c)
        validate_density_matrix(rho, atol=1e-9)
        assert np.trace(rho).real == pytest.approx(1.0, abs=1e-9)

    def test_idle_t1_decay(self):
        # Prepare |1>, idle for 5*T1, measure: P(1) lands within 3 sigma of
        # exp(-5) (small preparation/readout corrections are well inside).
        model = build_reference_model(6, num_qubits=1)
        t1 = model.qubits[0].t1
        n_idle = int(round(5 * t1 / 50.0))
        c = Circuit(1)
        c.add("x", 0)
        for _ in range(n_idle):
            c.add("i", 0)
        c.measure(0, 0)
        shots = 4000
        r = DensityMatrixBackend(model).run(c, shots, seed=11)
        p = np.exp(-5.0)
        sigma = np.sqrt(p * (1 - p) / shots)
        assert abs(r.probability("1") - p) < 3 * sigma

    def test_measurement_window_damping(self):
        # P(1) after a perfect prep is reduced by exp(-t_meas/T1) plus the
        # T2 -free diagonal part; with a noiseless-gate model and finite
        # T1/T2 the measured decay equals exp(-1000/T1) exactly.
        qubits = (QubitNoiseParams(t1=50_000.0, t2=70_000.0),)
        gates = {
            "i": GateNoiseSpec(duration=50.0),
            "rz": GateNoiseSpec(duration=0.0),
            "rx90": GateNoiseSpec(duration=0.0),  # instantaneous, error-free
            "cx": GateNoiseSpec(duration=300.0),
        }
        model = NoiseModel(qubits=qubits, gates=gates, seed=0)
        c = Circuit(1)
        c.add("x", 0).measure(0, 0)
        dist = DensityMatrixBackend(model).exact_distribution(c)
        assert dist["1"] == pytest.approx(np.exp(-1000.0 / 50_000.0), abs=1e-12)

    def test_depolarizing_shrinks_purity(self):
        model = build_reference_model(0, num_qubits=2)
        backend = DensityMatrixBackend(model)
        c = Circuit(2)
        for _ in range(10):
            c.cx(0, 1)
        rho = backend.final_density_matrix(c)
        # 10 noisy cx on |00>: purity must drop measurably below 1.
        purity = np.trace(rho @ rho).real
        assert 0.5 < purity < 0.99

    def test_readout_confusion_exact(self):
        qubits = (
            QubitNoiseParams(
                t1=float("inf"), t2=float("inf"), readout_confusion=((0.9, 0.1), (0.2, 0.8))
            ),
        )
        gates = {
            "i": GateNoiseSpec(duration=50.0),
            "rz": GateNoiseSpec(duration=0.0),
            "rx90": GateNoiseSpec(duration=50.0),
            "cx": GateNoiseSpec(duration=300.0),
        }
        model = NoiseModel(qubits=qubits, gates=gates, seed=0)
        backend = DensityMatrixBackend(model)
        ground = Circuit(1)
        ground.measure(0, 0)
        assert backend.exact_distribution(ground)["1"] == pytest.approx(0.1, abs=1e-12)
        excited = Circuit(1)
        excited.add("x", 0).measure(0, 0)
        assert backend.exact_distribution(excited)["0"] == pytest.approx(0.2, abs=1e-12)


class TestMidcircuitSemantics:
    def test_double_measure_confusion_flips_record_only(self):
        # Re-measuring a collapsed qubit gives identical true outcomes; the
        # two records disagree only through independent confusion flips.
        qubits = (
            QubitNoiseParams(
                t1=float("inf"), t2=float("inf"), readout_confusion=((0.7, 0.3), (0.2, 0.8))
            ),
        )
        gates = {
            "i": GateNoiseSpec(duration=50.0),
            "rz": GateNoiseSpec(duration=0.0),
            "rx90": GateNoiseSpec(duration=50.0),
            "cx": GateNoiseSpec(duration=300.0),
        }
        model = NoiseModel(qubits=qubits, gates=gates, seed=0)
        c = Circuit(1)
        c.measure(0, 0).measure(0, 1)
        dist = DensityMatrixBackend(model).exact_distribution(c)
        assert dist["00"] == pytest.approx(0.49, abs=1e-12)
        assert dist["01"] == pytest.approx(0.21, abs=1e-12)
        assert dist["10"] == pytest.approx(0.21, abs=1e-12)
        assert dist["11"] == pytest.approx(0.09, abs=1e-12)

    def test_collapse_then_hadamard(self):
        backend = DensityMatrixBackend(build_noiseless_model(1))
        c = Circuit(1)
        c.add("h", 0).measure(0, 0).add("h", 0).measure(0, 1)
        dist = backend.exact_distribution(c)
        for key in ("00", "01", "10", "11"):
            assert dist[key] == pytest.approx(0.25, abs=1e-10)

    def test_reset_returns_ground(self):
        backend = DensityMatrixBackend(build_noiseless_model(1))
        c = Circuit(1)
        c.add("x", 0).reset(0).measure(0, 0)
        assert backend.run(c, 100, seed=0).counts == {"0": 100}

    def test_reset_after_measure_uses_branch_path(self):
        backend = DensityMatrixBackend(build_noiseless_model(1))
        c = Circuit(1)
        c.add("h", 0).measure(0, 0).reset(0).measure(0, 1)
        dist = backend.exact_distribution(c)
        assert dist["00"] == pytest.approx(0.5, abs=1e-10)
        assert dist["10"] == pytest.approx(0.5, abs=1e-10)

    def test_slot_records_preserve_overwritten_bits(self):
        backend = DensityMatrixBackend(build_noiseless_model(1))
        c = Circuit(1)
        # Both measures write cbit 0; the register keeps the second, the
        # slot records keep both.
        c.add("x", 0).measure(0, 0).add("x", 0).measure(0, 0)
        r = backend.run(c, 80, seed=2)
        assert r.counts == {"0": 80}
        assert r.slot_records[0] == {"qubit": 0, "cbit": 0, "zeros": 0, "ones": 80}
        assert r.slot_records[1] == {"qubit": 0, "cbit": 0, "zeros": 80, "ones": 0}

    def test_midcircuit_rejected_when_unsupported(self):
        backend = DensityMatrixBackend(build_noiseless_model(2), supports_midcircuit=False)
        c = Circuit(2)
        c.add("h", 0).measure(0, 0).cx(0, 1).measure(1, 1)
        with pytest.raises(ValueError, match="mid-circuit"):
            backend.run(c, 10, seed=0)


class TestProbes:
    def test_usable_qubits_matches_model(self):
        for n in (1, 4, 8):
            backend = DensityMatrixBackend(build_noiseless_model(n))
            assert probe_usable_qubits(backend) == n

    def test_usable_qubits_capped_backend(self):
        backend = DensityMatrixBackend(build_noiseless_model(10), max_qubits=5)
        assert probe_usable_qubits(backend) == 5

    def test_usable_qubits_detects_truncation(self):
        class Truncating(Backend):
            def __init__(self):
                self.inner = DensityMatrixBackend(build_noiseless_model(8))

            def descriptor(self):
                return self.inner.descriptor()

            def run(self, circuit, shots, seed=None):
                r = self.inner.run(circuit, shots, seed)
                if circuit.num_qubits > 3:
                    clipped = {}
                    for k, v in r.counts.items():
                        key = k[:3]
                        clipped[key] = clipped.get(key, 0) + v
                    r = ExecutionResult(
                        counts=clipped,
                        shots=r.shots,
                        circuit_duration=r.circuit_duration,
                        virtual_wall_time=r.virtual_wall_time,
                        start_time=r.start_time,
                        seed=r.seed,
                        model_digest=r.model_digest,
                    )
                return r

        assert probe_usable_qubits(Truncating()) == 3

    def test_midcircuit_probe_noiseless(self):
        probe = probe_midcircuit(DensityMatrixBackend(build_noiseless_model(2)), shots=400)
        assert probe.supported
        assert probe.consistency == 1.0

    def test_midcircuit_probe_reference_matches_oracle(self):
        model = build_reference_model(12, num_qubits=2)
        backend = DensityMatrixBackend(model)
        c = Circuit(2)
        c.add("h", 0).cx(0, 1).measure(0, 0).cx(0, 1).measure(1, 1)
        exact = backend.exact_distribution(c)
        p_good = exact.get("00", 0.0) + exact.get("10", 0.0)
        shots = 2000
        probe = probe_midcircuit(DensityMatrixBackend(model), shots=shots, seed=3)
        sigma = np.sqrt(p_good * (1 - p_good) / shots)
        assert probe.supported
        assert abs(probe.consistency - p_good) < 3 * sigma

    def test_midcircuit_probe_unsupported_stub(self):
        backend = DensityMatrixBackend(build_noiseless_model(2), supports_midcircuit=False)
        probe = probe_midcircuit(backend, shots=100)
        assert probe == MidcircuitProbe(supported=False)


class TestDescriptorAndRouting:
    def test_descriptor_contents(self):
        model = build_reference_model(0, num_qubits=4)
        d = DensityMatrixBackend(model).descriptor()
        assert d.usable_qubits == 4
        assert len(d.coupling) == 4 * 3
        assert d.is_all_to_all()
        assert set(d.native_gates) == {"i", "rx90", "rz", "cx"}
        assert d.durations["cx"] == 300.0
        assert d.durations["measure"] == 1000.0
        assert d.durations["reset"] == 500.0
        assert d.supports_midcircuit

    def test_line_coupled_backend_routes(self):
        line = ((0, 1), (1, 2))
        backend = DensityMatrixBackend(build_noiseless_model(3), coupling=line)
        assert not backend.descriptor().is_all_to_all()
        c = Circuit(3)
        c.add("x", 0).cx(0, 2).measure_all()
        dist = backend.exact_distribution(c)
        # x then cx(0,2): |100> -> |101>.
        assert dist["101"] == pytest.approx(1.0, abs=1e-10)

    def test_too_wide_circuit_rejected(self):
        backend = DensityMatrixBackend(build_noiseless_model(2))
        c = Circuit(3)
        c.measure_all()
        with pytest.raises(ValueError, match="qubits"):
            backend.run(c, 10, seed=0)


class TestDriftIntegration:
    def test_snapshot_follows_virtual_clock(self):
        model = build_reference_model(
            2,
            num_qubits=1,
            drift=(
                DriftSchedule(
                    target="qubits.0.t1", mode="telegraph", jump_time=5e6, jump_value=10_000.0
                ),
            ),
        )
        backend = DensityMatrixBackend(model)
        before = backend.snapshot()
        assert before.qubits[0].t1 == model.qubits[0].t1
        c = Circuit(1)
        c.add("x", 0)
        for _ in range(40):
            c.add("i", 0)
        c.measure(0, 0)
        p_before = backend.exact_distribution(c)["1"]
        # Advance the clock past the jump with repeated runs.
        while backend.clock_ns < 5e6:
            backend.run(c, 100)
        after = backend.snapshot()
        assert after.qubits[0].t1 == 10_000.0
        p_after = backend.exact_distribution(c)["1"]
        assert p_after < p_before  # five-fold shorter T1 decays more


class TestResultSerialization:
    def test_json_round_trip_fields(self):
        import json

        backend = DensityMatrixBackend(build_reference_model(0, num_qubits=2))
        c = Circuit(2)
        c.add("h", 0).cx(0, 1).measure_all()
        r = backend.run(c, 64, seed=5)
        data = json.loads(r.to_json())
        assert data["shots"] == 64
        assert sum(data["counts"].values()) == 64
        assert data["seed"] == 5
        assert data["model_digest"] == backend.model.digest()
        assert data["circuit_duration_ns"] == r.circuit_duration
        assert len(data["slot_records"]) == 2

    def test_counts_must_sum_to_shots(self):
        with pytest.raises(ValueError):
            ExecutionResult(
                counts={"0": 3},
                shots=5,
                circuit_duration=0.0,
                virtual_wall_time=0.0,
                start_time=0.0,
                seed=0,
                model_digest="x",
            )
