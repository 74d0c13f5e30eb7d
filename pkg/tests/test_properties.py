"""Property-based invariants (hypothesis): channel completeness, unitary
purity, verification identity, renormalization scale invariance, Prony
round-trips, and CSV determinism."""

import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vpelab.cli import write_sweep_csv
from vpelab.experiments import SweepResult, SweepRow
from vpelab.noise import (
    amplitude_damping, bit_flip, depolarizing, phase_damping,
)
from vpelab.postprocess import (
    SpectralEstimate, prony, renormalized_expectation,
)
from vpelab.sim import Circuit, DensityMatrix, Gate, apply_circuit
from vpelab.vpe import PhaseFunctionRecord, _assemble, _verified_indices

import oracles


def random_unitary(rng, dim):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


rates = st.floats(min_value=0.0, max_value=1.0,
                  allow_nan=False, allow_infinity=False)


class TestChannelCompleteness:
    @given(rate=rates, kind=st.sampled_from(
        ["depolarizing", "amplitude_damping", "phase_damping", "bit_flip"]))
    @settings(max_examples=50, deadline=None)
    def test_kraus_sum_is_identity(self, rate, kind):
        channel = {"depolarizing": depolarizing,
                   "amplitude_damping": amplitude_damping,
                   "phase_damping": phase_damping,
                   "bit_flip": bit_flip}[kind](rate)
        total = sum(k.conj().T @ k for k in channel.operators)
        np.testing.assert_allclose(total, np.eye(2), atol=1e-10)


class TestUnitaryEvolution:
    @given(seed=st.integers(0, 10 ** 6), num_qubits=st.integers(1, 3))
    @settings(max_examples=30, deadline=None)
    def test_purity_and_trace_preserved(self, seed, num_qubits):
        rng = np.random.default_rng(seed)
        circ = Circuit(num_qubits)
        for _ in range(3):
            q = int(rng.integers(num_qubits))
            circ.append(Gate((q,), random_unitary(rng, 2)))
        rho = apply_circuit(DensityMatrix.computational(num_qubits), circ)
        assert np.trace(rho.matrix).real == pytest.approx(1.0, abs=1e-10)
        purity = np.trace(rho.matrix @ rho.matrix).real
        assert purity == pytest.approx(1.0, abs=1e-10)

    @given(seed=st.integers(0, 10 ** 6))
    @settings(max_examples=20, deadline=None)
    def test_circuit_acts_linearly(self, seed):
        rng = np.random.default_rng(seed)
        circ = Circuit(2)
        circ.append(Gate((0,), random_unitary(rng, 2)))
        circ.append(Gate((0, 1), random_unitary(rng, 4)))
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        a = a @ a.conj().T
        a /= np.trace(a)
        b = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        b = b @ b.conj().T
        b /= np.trace(b)
        w = float(rng.uniform(0.1, 0.9))
        mixed = apply_circuit(
            DensityMatrix(2, w * a + (1 - w) * b), circ).matrix
        parts = (w * apply_circuit(DensityMatrix(2, a), circ).matrix
                 + (1 - w) * apply_circuit(DensityMatrix(2, b), circ).matrix)
        np.testing.assert_allclose(mixed, parts, atol=1e-10)


class TestVerificationIdentity:
    @given(seed=st.integers(0, 10 ** 6))
    @settings(max_examples=15, deadline=None)
    def test_noiseless_verified_equals_control_off_diagonal(self, seed):
        from vpelab.sim import partial_trace
        rng = np.random.default_rng(seed)
        prep = Circuit(2)
        prep.append(Gate((0,), random_unitary(rng, 2)))
        prep.append(Gate((0, 1), random_unitary(rng, 4)))
        evolution = Circuit(3)
        # Controlled random two-qubit unitary on the system register.
        u = random_unitary(rng, 4)
        controlled = np.eye(8, dtype=complex)
        controlled[4:, 4:] = u
        evolution.append(Gate((0, 1, 2), controlled))
        circ = _assemble(prep, evolution, "single_control")
        rho = apply_circuit(DensityMatrix.computational(3), circ)
        idx0, idx1 = _verified_indices(3)
        verified = 2.0 * rho.matrix[idx1, idx0]
        control = partial_trace(rho, keep=(0,))
        assert abs(verified - 2.0 * control.matrix[1, 0]) < 1e-10


class TestRenormalizationInvariance:
    @given(seed=st.integers(0, 10 ** 6),
           scale=st.floats(1e-3, 1e3, allow_nan=False))
    @settings(max_examples=50, deadline=None)
    def test_uniform_scaling_cancels(self, seed, scale):
        rng = np.random.default_rng(seed)
        eigs = list(rng.uniform(-3, 3, 4))
        amps = list(rng.uniform(0.05, 1.0, 4))
        base = renormalized_expectation(
            SpectralEstimate(eigs, amps, "test"))
        scaled = renormalized_expectation(
            SpectralEstimate(eigs, [scale * a for a in amps], "test"))
        assert scaled == pytest.approx(base, rel=1e-9, abs=1e-9)


class TestPronyRoundTrip:
    @given(seed=st.integers(0, 10 ** 6), modes=st.integers(1, 4))
    @settings(max_examples=25, deadline=None)
    def test_separated_modes_recover(self, seed, modes):
        rng = np.random.default_rng(seed)
        # Well-separated eigenvalues and non-negligible amplitudes.
        eigs = np.sort(rng.uniform(-2.5, 2.5, modes))
        if modes > 1 and np.min(np.diff(eigs)) < 0.5:
            eigs = np.linspace(-2.0, 2.0, modes) + rng.uniform(-0.1, 0.1)
        amps = rng.uniform(0.15, 1.0, modes)
        amps /= amps.sum()
        t_grid = np.arange(12) * 0.6
        g = sum(a * np.exp(1j * e * t_grid) for a, e in zip(amps, eigs))
        est = prony(PhaseFunctionRecord(t_grid, g), modes)
        order = np.argsort(est.eigenvalues)
        np.testing.assert_allclose(np.asarray(est.eigenvalues)[order],
                                   eigs, atol=1e-6)
        np.testing.assert_allclose(np.asarray(est.amplitudes)[order],
                                   amps, atol=1e-6)


class TestCsvDeterminism:
    @given(seed=st.integers(0, 10 ** 6))
    @settings(max_examples=20, deadline=None)
    def test_row_order_does_not_matter(self, seed, tmp_path_factory):
        rng = np.random.default_rng(seed)
        rows = [SweepRow(rate, rep, est, float(rng.uniform(0, 1)))
                for rate in (1e-3, 1e-2)
                for rep in range(3)
                for est in ("vpe", "tomography")]
        result = SweepResult(plan_name="prop", rates=(1e-3, 1e-2),
                             rows=list(rows), failures=0, floors={})
        shuffled_rows = list(rows)
        rng.shuffle(shuffled_rows)
        shuffled = SweepResult(plan_name="prop", rates=(1e-3, 1e-2),
                               rows=shuffled_rows, failures=0, floors={})
        out = tmp_path_factory.mktemp("csv")
        a, b = out / "a.csv", out / "b.csv"
        write_sweep_csv(result, str(a))
        write_sweep_csv(shuffled, str(b))
        assert a.read_bytes() == b.read_bytes()
