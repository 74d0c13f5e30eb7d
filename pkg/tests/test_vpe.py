"""Verification protocols: exact/sampled phase functions, compilation,
parallel VPE, and end-to-end verified expectation values."""

import numpy as np
import pytest

from vpelab import ansatz as az
from vpelab import givens as gv
from vpelab import hamiltonians as hm
from vpelab import vpe
from vpelab.noise import (
    NoiseModel, amplitude_damping, depolarizing, uniform_noise,
)
from vpelab.sim import (
    Circuit, DensityMatrix, Gate, SimulationError, apply_circuit,
    partial_trace,
)

import oracles


def hopping_decomposition() -> hm.HamiltonianDecomposition:
    return hm.decompose_number_conserving(hm.build_hopping_chain(4, 1.0))


def random_givens_prep(rng) -> Circuit:
    thetas = rng.uniform(-np.pi, np.pi, az.givens_parameter_count(4))
    prep = Circuit(4)
    prep.append(Gate((0,), oracles.PAULI["X"]))
    prep.append(Gate((1,), oracles.PAULI["X"]))
    prep.extend(az.givens_network(thetas, 4))
    return prep


def z0_decomposition() -> hm.HamiltonianDecomposition:
    psum = hm.PauliSum(1)
    psum.add_term("Z", 1.0)
    decomp = hm.HamiltonianDecomposition(1)
    decomp.summands.append(hm.PauliGroupSummand("z0", psum))
    return decomp


class TestExactPhaseFunction:
    def test_eigenstate_pure_phase(self):
        # |00> has energy 0 under the hopping chain; |10> under Z0 has -1.
        decomp = z0_decomposition()
        summand = decomp.summands[0]
        prep = Circuit(1)
        prep.append(Gate((0,), oracles.PAULI["X"]))
        t_grid = np.linspace(0.0, 2.0, 7)
        record = vpe.exact_phase_function(
            prep, lambda t: summand.evolution(t, control=True), t_grid)
        np.testing.assert_allclose(record.g_estimates,
                                   np.exp(-1j * t_grid), atol=1e-10)

    def test_normalization_at_zero(self):
        rng = np.random.default_rng(2)
        summand = hopping_decomposition().summands[0]
        record = vpe.exact_phase_function(
            random_givens_prep(rng),
            lambda t: summand.evolution(t, control=True), [0.0])
        assert abs(record.g_estimates[0] - 1.0) < 1e-10

    def test_matches_dense_eigensolve(self):
        rng = np.random.default_rng(3)
        prep = random_givens_prep(rng)
        summand = hopping_decomposition().summands[0]
        t_grid = np.linspace(0.0, 2.5, 9)
        record = vpe.exact_phase_function(
            prep, lambda t: summand.evolution(t, control=True), t_grid)
        psi = oracles.statevector(prep)
        expected = oracles.exact_phase_signal(psi, summand.matrix(), t_grid)
        np.testing.assert_allclose(record.g_estimates, expected, atol=1e-10)

    def test_verification_identity(self):
        # Noiseless: the verified off-diagonal equals the unverified
        # control-qubit off-diagonal.
        rng = np.random.default_rng(5)
        prep = random_givens_prep(rng)
        summand = hopping_decomposition().summands[0]
        t = 0.9
        circ = vpe._assemble(prep, summand.evolution(t, control=True),
                             "single_control")
        rho = apply_circuit(DensityMatrix.computational(5), circ)
        verified = 2.0 * rho.matrix[16, 0]
        control = partial_trace(rho, keep=(0,))
        unverified = 2.0 * control.matrix[1, 0]
        assert abs(verified - unverified) < 1e-10

    def test_failure_projection(self):
        # The verification-failing ensemble's control qubit is |1><1|.
        rng = np.random.default_rng(6)
        prep = random_givens_prep(rng)
        summand = hopping_decomposition().summands[0]
        circ = vpe._assemble(prep, summand.evolution(0.7, control=True),
                             "single_control")
        rho = apply_circuit(DensityMatrix.computational(5), circ).matrix
        fail = rho.copy()
        # Zero out the verified system block (system register = 0000).
        for c_row in (0, 1):
            for c_col in (0, 1):
                fail[c_row * 16, c_col * 16] = 0.0
        control = np.zeros((2, 2), dtype=complex)
        for c_row in (0, 1):
            for c_col in (0, 1):
                control[c_row, c_col] = np.trace(
                    fail[c_row * 16:(c_row + 1) * 16,
                         c_col * 16:(c_col + 1) * 16])
        control /= np.trace(control)
        np.testing.assert_allclose(control, np.diag([0.0, 1.0]), atol=1e-10)

    def test_constant_damping_under_depolarizing(self):
        # Fast-forwarded circuits: g_noise(t)/g(t) is t-independent.
        rng = np.random.default_rng(7)
        prep = random_givens_prep(rng)
        summand = hopping_decomposition().summands[0]
        t_grid = np.linspace(0.5, 2.5, 5)
        maker = lambda t: summand.evolution(t, control=True)
        clean = vpe.exact_phase_function(prep, maker, t_grid).g_estimates
        noisy = vpe.exact_phase_function(
            prep, maker, t_grid,
            noise=uniform_noise(depolarizing(1e-3))).g_estimates
        ratios = np.abs(noisy / clean)
        assert np.ptp(ratios) / ratios.mean() < 0.02


class TestSampledPhaseFunction:
    def test_eigenstate_concentration(self):
        decomp = z0_decomposition()
        summand = decomp.summands[0]
        prep = Circuit(1)
        prep.append(Gate((0,), oracles.PAULI["X"]))
        rng = np.random.default_rng(11)
        t = 0.8
        m = 10 ** 4
        g = vpe.sampled_vpe_single_control(
            prep, lambda s: summand.evolution(s, control=True), t, m, rng)
        assert abs(g - np.exp(-1j * t)) < 3 / np.sqrt(m)

    def test_zero_shots_forbidden(self):
        summand = z0_decomposition().summands[0]
        rng = np.random.default_rng(0)
        with pytest.raises(SimulationError):
            vpe.sampled_vpe_single_control(
                Circuit(1), lambda s: summand.evolution(s, control=True),
                0.5, 0, rng)

    def test_noisy_mean_matches_exact_oracle(self):
        rng = np.random.default_rng(13)
        prep = random_givens_prep(rng)
        summand = hopping_decomposition().summands[0]
        noise = uniform_noise(depolarizing(5e-3))
        t = 0.9
        maker = lambda s: summand.evolution(s, control=True)
        exact = vpe.exact_tally_estimate(prep, maker(t), noise)
        m = 400
        repeats = 200
        draws = np.array([
            vpe.sampled_vpe_single_control(prep, maker, t, m, rng, noise)
            for _ in range(repeats)])
        sigma = np.sqrt(1.0 / m)    # upper bound on per-repeat std dev
        assert abs(draws.mean() - exact) < 3 * sigma / np.sqrt(repeats) * 2


class TestControlFree:
    def _setup(self, rng):
        thetas = rng.uniform(-np.pi, np.pi, az.givens_parameter_count(4))
        ansatz = az.givens_network(thetas, 4)
        prep = az.compose_prep_for_control_free(ansatz, occupation=2)
        summand = hopping_decomposition().summands[0]
        return prep, ansatz, summand

    def test_exact_mode_equivalence_with_single_control(self):
        rng = np.random.default_rng(17)
        prep_cf, ansatz, summand = self._setup(rng)
        prep_sc = Circuit(4)
        prep_sc.append(Gate((0,), oracles.PAULI["X"]))
        prep_sc.append(Gate((1,), oracles.PAULI["X"]))
        prep_sc.extend(ansatz)
        t_grid = np.linspace(0.0, 2.0, 6)
        single = vpe.exact_phase_function(
            prep_sc, lambda t: summand.evolution(t, control=True), t_grid)
        config = vpe.VerifiedEstimatorConfig(
            protocol="control_free",
            reference_eigenvalue=summand.reference_eigenvalue)
        free = vpe.exact_phase_function(
            prep_cf, lambda t: summand.evolution(t, control=False), t_grid,
            config=config)
        np.testing.assert_allclose(free.g_estimates, single.g_estimates,
                                   atol=1e-10)

    def test_vacuum_reference_eigenstate_concentration(self):
        # 1-qubit analogue: identity prep keeps |0> as the reference
        # (Z eigenvalue +1) and |1> as the signal eigenstate (eigenvalue -1).
        summand = z0_decomposition().summands[0]
        prep = Circuit(1)
        rng = np.random.default_rng(19)
        t = 0.6
        m = 10 ** 4
        g = vpe.sampled_vpe_control_free(
            prep, lambda s: summand.evolution(s, control=False), t, m, rng,
            reference_eigenvalue=1.0)
        assert abs(g - np.exp(-1j * t)) < 3 / np.sqrt(m)

    def test_zero_time_concentrates_on_one(self):
        summand = z0_decomposition().summands[0]
        prep = Circuit(1)
        rng = np.random.default_rng(23)
        g = vpe.sampled_vpe_control_free(
            prep, lambda s: summand.evolution(s, control=False), 0.0,
            10 ** 4, rng, reference_eigenvalue=1.0)
        assert abs(g - 1.0) < 3 / np.sqrt(10 ** 4)


class TestControlNoiseCompilation:
    def test_flags_off_identity_schedule(self):
        branches = vpe.control_noise_compilation(vpe.VerifiedEstimatorConfig())
        assert len(branches) == 1
        assert branches[0].weight == 1.0
        assert not branches[0].flip
        assert branches[0].z_angle == 0.0

    def test_readout_damping_artifact(self):
        # Amplitude damping on the control between the pre-rotation and
        # readout: g_err = (1-lambda) g + lambda without compilation,
        # (1-lambda) g with the 50% basis-flip average.
        rng = np.random.default_rng(29)
        prep = random_givens_prep(rng)
        summand = hopping_decomposition().summands[0]
        t = 1.1
        lam = 0.2
        noise = NoiseModel(readout_channel=amplitude_damping(lam),
                           readout_qubits=(0,))
        evolution = summand.evolution(t, control=True)
        clean = vpe.exact_tally_estimate(prep, evolution)
        # Verified probability per quadrature (damping only hits readout, so
        # the pre-readout state is the clean one).
        verified = []
        for basis in ("x", "y"):
            p_plus, p_minus = vpe.verified_tally_probabilities(
                prep, evolution, basis)
            verified.append(p_plus + p_minus)
        plain = vpe.exact_tally_estimate(prep, evolution, noise)
        expected = ((1 - lam) * clean
                    + lam * (verified[0] + 1j * verified[1]))
        assert abs(plain - expected) < 1e-10
        # The 50% basis-flip average cancels the additive artifact, leaving
        # a pure (1-lambda) rescaling.
        flipped = vpe.exact_tally_estimate(
            prep, evolution, noise,
            vpe.VerifiedEstimatorConfig(basis_flip_50pct=True))
        assert abs(flipped - (1 - lam) * clean) < 1e-10


class TestParallelVpe:
    def _pauli_summands(self, count):
        patterns = ["ZIII", "IZII", "IIZI"][:count]
        out = []
        for k, pattern in enumerate(patterns):
            psum = hm.PauliSum(4)
            psum.add_term(pattern, 1.0)
            out.append(hm.PauliGroupSummand(f"z{k}", psum))
        return out

    def test_single_summand_reduces_to_single_control(self):
        rng = np.random.default_rng(31)
        prep = random_givens_prep(rng)
        summand = self._pauli_summands(1)[0]
        t_grid = np.linspace(0.0, 1.5, 4)
        parallel = vpe.parallel_vpe([summand], prep, t_grid)[0]
        single = vpe.exact_phase_function(
            prep, lambda t: summand.evolution(t, control=True), t_grid)
        np.testing.assert_allclose(parallel.g_estimates, single.g_estimates,
                                   atol=1e-10)

    @pytest.mark.parametrize("count", [2, 3])
    def test_ghost_set_odd_integers(self, count):
        # Pauli summands with eigenvalues +-1: the ghost-frequency set for
        # any control is the odd integers {-2L+1, ..., 2L-1}.
        eig_lists = [[-1.0, 1.0] for _ in range(count)]
        # One amplitude per joint eigenstate: use a uniform 2-state example.
        amp_lists = [0.5, 0.5]
        eig_per_state = [[-1.0, 1.0] for _ in range(count)]
        pairs = vpe.ghost_spectrum(0, eig_per_state, amp_lists)
        freqs = sorted(f for f, w in pairs if w > 1e-12)
        expected = [float(k) for k in range(-2 * count + 1, 2 * count, 2)]
        np.testing.assert_allclose(freqs, expected, atol=1e-10)

    @pytest.mark.parametrize("count", [2, 3])
    def test_weighted_sum_recovers_expectation(self, count):
        rng = np.random.default_rng(37)
        prep = random_givens_prep(rng)
        summands = self._pauli_summands(count)
        # dt small enough that no two ghost frequencies (spread 4*count-2)
        # alias on the grid.
        t_grid = np.arange(4 * count + 4) * (np.pi / (2 * count))
        records = vpe.parallel_vpe(summands, prep, t_grid)
        psi = oracles.statevector(prep)
        from vpelab.postprocess import (fit_known_phases,
                                        renormalized_expectation)
        for s, summand in enumerate(summands):
            ghost_eigs = [float(k) for k in range(-2 * count + 1,
                                                  2 * count, 2)]
            est = fit_known_phases(records[s], ghost_eigs)
            value = renormalized_expectation(est)
            truth = float(np.real(psi.conj() @ summand.matrix() @ psi))
            assert abs(value - truth) < 1e-10


class TestVerifiedExpectation:
    def test_z_on_zero_state(self):
        decomp = z0_decomposition()
        value = vpe.verified_expectation(decomp, Circuit(1))
        assert value == pytest.approx(1.0, abs=1e-10)

    def test_hopping_ground_state_energy(self):
        evals, evecs = np.linalg.eigh(hm.hopping_matrix(4, 1.0))
        prep = Circuit(4)
        prep.append(Gate((0,), oracles.PAULI["X"]))
        prep.append(Gate((1,), oracles.PAULI["X"]))
        prep.extend(gv.decompose_single_particle(evecs))
        decomp = hopping_decomposition()
        value = vpe.verified_expectation(decomp, prep)
        ground = float(evals[evals < 0].sum())
        assert value == pytest.approx(ground, abs=1e-6)

    def test_default_grid_keeps_phases_in_branch(self):
        for summand in hopping_decomposition().summands :
            for estimator in ("known_phase_fit", "prony"):
                grid = vpe.default_t_grid(summand, estimator)
                bound = float(np.abs(summand.known_eigenvalues).max())
                dt = grid[1] - grid[0]
                assert bound * dt <= np.pi + 1e-12
