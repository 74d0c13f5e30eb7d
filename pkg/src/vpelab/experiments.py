"""Reusable experiment definitions for the paper-replication studies.

Each experiment is a pure function of an `ExperimentPlan`: noise-rate sweeps
comparing verified phase estimation (VPE) against the unmitigated tomography
baseline, variational optimization loops, sampling-convergence studies, and
the split-noise / term-wise diagnostics.  All randomness derives from the
plan seed via per-replicate child seeds, so results are reproducible and
independent of worker scheduling.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from vpelab import ansatz as az
from vpelab import hamiltonians as hm
from vpelab import noise as nz
from vpelab import postprocess as pp
from vpelab import sim as sm
from vpelab import vpe
from vpelab.sim import Circuit, Gate, SimulationError

_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)

_NOISE_KINDS = ("none", "depolarizing", "amplitude_damping",
                "phase_damping", "amplitude_phase_damping", "bit_flip")
_EXPERIMENT_KINDS = ("error_sweep", "vqe", "sampling_convergence",
                     "split_noise", "termwise")


# ---------------------------------------------------------------------------
# Plans
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentPlan:
    """Declarative description of one experiment run."""

    name: str = "custom"
    experiment: str = "error_sweep"
    hamiltonian: str = "hopping-chain"      # hopping-chain | tfim | h2-0.7414 | h2-2.0
    decomposition: str = "quadratic"        # quadratic | pauli-groups | low-rank
    ansatz: str = "givens"                  # givens | vha | fsw
    layers: int = 0
    occupation: int = 2
    num_qubits: int = 4
    protocol: str = "control_free"
    estimator: str = "prony"                # prony | known_phase_fit
    noise_kind: str = "depolarizing"
    rates: tuple[float, ...] = (1e-4, 3e-4, 1e-3, 3e-3, 1e-2)
    replicates: int = 50
    seed: int = 2026
    mode: str = "exact"                     # exact | exact_tally | sampled
    shots: int = 0
    noise_mask: str = "all"                 # all | control_only | system_only
    basis_flip_50pct: bool = False
    z_quarter_rotation: bool = False
    threads: int = 1
    # variational-loop fields
    budget: int = 500
    objective: str = "vpe"                  # vpe | tomography
    control_error: float = 0.0
    # sampling-convergence fields
    shot_list: tuple[int, ...] = (100, 1000, 10000, 100000)
    trials: int = 200

    def __post_init__(self):
        if self.experiment not in _EXPERIMENT_KINDS:
            raise SimulationError(f"unknown experiment {self.experiment!r}")
        if self.noise_kind not in _NOISE_KINDS:
            raise SimulationError(f"unknown noise kind {self.noise_kind!r}")
        if self.protocol not in ("single_control", "control_free"):
            raise SimulationError(f"unknown protocol {self.protocol!r}")
        if self.estimator not in ("prony", "known_phase_fit"):
            raise SimulationError(f"unknown estimator {self.estimator!r}")
        if self.mode not in ("exact", "exact_tally", "sampled"):
            raise SimulationError(f"unknown mode {self.mode!r}")
        if self.noise_mask not in ("all", "control_only", "system_only"):
            raise SimulationError(f"unknown noise mask {self.noise_mask!r}")
        if self.noise_mask != "all" and self.protocol != "single_control":
            raise SimulationError("split-noise masks need the single-control"
                                  " protocol")
        if self.replicates < 1:
            raise SimulationError("need at least one replicate")
        if list(self.rates) != sorted(self.rates) or any(
                r <= 0 for r in self.rates):
            raise SimulationError("rates must be positive and ascending")
        if self.mode == "sampled" and self.shots < 1:
            raise SimulationError("sampled mode needs a positive shot count")
        if self.trials < 1 or self.budget < 0:
            raise SimulationError("trials must be >= 1 and budget >= 0")


@dataclass(frozen=True)
class SweepRow:
    rate: float
    replicate: int
    estimator: str
    abs_error: float


@dataclass
class SweepResult:
    """Per-(rate, replicate, estimator) errors with aggregate views."""

    plan_name: str
    rates: tuple[float, ...]
    rows: list[SweepRow] = field(default_factory=list)
    failures: list[tuple[float, int, str]] = field(default_factory=list)
    floors: dict[str, float] = field(default_factory=dict)

    def errors(self, rate: float, estimator: str) -> np.ndarray:
        return np.array([r.abs_error for r in self.rows
                         if r.rate == rate and r.estimator == estimator])

    def aggregate(self, estimator: str, how: str = "rms") -> np.ndarray:
        out = []
        for rate in self.rates:
            errs = self.errors(rate, estimator)
            if errs.size == 0:
                out.append(np.nan)
            elif how == "rms":
                out.append(float(np.sqrt(np.mean(errs ** 2))))
            elif how == "median":
                out.append(float(np.median(errs)))
            else:
                raise SimulationError(f"unknown aggregate {how!r}")
        return np.array(out)

    def slope(self, estimator: str, how: str = "rms") -> float:
        """Log-log error-vs-rate slope, restricted to points above the floor.

        Rates whose aggregate error is within 10x the noiseless floor are
        excluded so post-processing floors do not corrupt the estimate;
        returns NaN when fewer than two rates survive.
        """
        agg = self.aggregate(estimator, how)
        floor = self.floors.get(estimator, 0.0)
        keep = [(r, e) for r, e in zip(self.rates, agg)
                if np.isfinite(e) and e > 10.0 * max(floor, 1e-300)]
        if len(keep) < 2:
            return float("nan")
        x = np.log10([r for r, _ in keep])
        y = np.log10([e for _, e in keep])
        return float(np.polyfit(x, y, 1)[0])


# ---------------------------------------------------------------------------
# System construction
# ---------------------------------------------------------------------------

def _data_file(name: str):
    return resources.files("vpelab").joinpath("data", name)


def tfim_groups(psum: hm.PauliSum) -> hm.HamiltonianDecomposition:
    """Split a Pauli sum into single-Z and XX commuting groups."""
    n = psum.num_qubits
    fields = hm.PauliSum(n)
    bonds = hm.PauliSum(n)
    for term in psum.terms:
        letters = set(term.pattern) - {"I"}
        (fields if letters == {"Z"} else bonds).add_term(
            term.pattern, term.coefficient)
    decomp = hm.HamiltonianDecomposition(n)
    if fields.num_terms:
        decomp.summands.append(hm.PauliGroupSummand("fields", fields))
    if bonds.num_terms:
        decomp.summands.append(hm.PauliGroupSummand("bonds", bonds))
    return decomp


def build_decomposition(plan: ExperimentPlan) -> hm.HamiltonianDecomposition:
    n = plan.num_qubits
    if plan.hamiltonian == "hopping-chain":
        if plan.decomposition == "quadratic":
            decomp = hm.HamiltonianDecomposition(n)
            decomp.summands.append(hm.QuadraticSummand(
                "hopping", hm.hopping_matrix(n, 1.0, periodic=False)))
            return decomp
        if plan.decomposition == "pauli-groups":
            return hm.decompose_number_conserving(
                hm.build_hopping_chain(n, 1.0, periodic=False))
    elif plan.hamiltonian == "tfim":
        if plan.decomposition == "pauli-groups":
            # Ferromagnetic signs put |0...0> (the VHA starting state) in the
            # ground sector of the field term.
            return tfim_groups(hm.build_tfim(n, -1.0, -1.0))
    elif plan.hamiltonian in ("h2-0.7414", "h2-2.0"):
        tag = plan.hamiltonian.split("-", 1)[1]
        tag = f"{float(tag):g}"
        if plan.decomposition == "pauli-groups":
            op = hm.load_hamiltonian_file(_data_file(f"h2_{tag}.ham"))
            return hm.decompose_number_conserving(op)
        if plan.decomposition == "low-rank":
            one_body, factors, constant = hm.load_low_rank_file(
                _data_file(f"h2_{tag}_lowrank.json"))
            return hm.low_rank_decomposition(one_body, factors, constant)
    raise SimulationError(
        f"unsupported hamiltonian/decomposition pair "
        f"{plan.hamiltonian!r}/{plan.decomposition!r}")


def _ansatz_circuit(plan: ExperimentPlan, params) -> Circuit:
    spec = az.AnsatzSpec(plan.ansatz, tuple(params), plan.num_qubits,
                         layers=plan.layers, occupation=plan.occupation)
    circ = spec.build()
    if plan.control_error:
        circ = az.perturb_sqrt_iswap(
            az.compile_givens_to_sqrt_iswap(circ),
            [plan.control_error] * az.count_sqrt_iswap(
                az.compile_givens_to_sqrt_iswap(circ)))
    return circ


def _system_prep(plan: ExperimentPlan, ansatz_circ: Circuit) -> Circuit:
    """Physical state preparation: Fock occupation then the ansatz."""
    circ = Circuit(plan.num_qubits)
    if plan.ansatz != "vha":
        for q in range(plan.occupation):
            circ.append(Gate((q,), _X, label="X"))
    circ.extend(ansatz_circ)
    return circ


def _protocol_prep(plan: ExperimentPlan, ansatz_circ: Circuit) -> Circuit:
    if plan.protocol == "control_free":
        return az.compose_prep_for_control_free(
            ansatz_circ, occupation=plan.occupation)
    return ansatz_circ


def _estimator_config(plan: ExperimentPlan) -> vpe.VerifiedEstimatorConfig:
    return vpe.VerifiedEstimatorConfig(
        protocol=plan.protocol,
        basis_flip_50pct=plan.basis_flip_50pct,
        z_quarter_rotation=plan.z_quarter_rotation,
        reference_eigenvalue=0.0 if plan.protocol == "control_free" else None)


def _noise_model(plan: ExperimentPlan, rate: float) -> nz.NoiseModel | None:
    if plan.noise_kind == "none" or rate == 0.0:
        return None
    model = nz.make_noise_model(plan.noise_kind, rate)
    if plan.noise_mask == "control_only":
        return model.masked({0})
    if plan.noise_mask == "system_only":
        return model.masked(set(range(1, plan.num_qubits + 1)))
    return model


# ---------------------------------------------------------------------------
# Independent dense truth (no simulator circuit path)
# ---------------------------------------------------------------------------

def statevector(circuit: Circuit) -> np.ndarray:
    """|psi> = U|0...0> via tensor contractions, independent of the
    density-matrix simulator's operator-embedding code path."""
    n = circuit.num_qubits
    psi = np.zeros((2,) * n, dtype=complex)
    psi[(0,) * n] = 1.0
    for moment in circuit.moments:
        for gate in moment.gates:
            k = len(gate.targets)
            op = gate.unitary.reshape((2,) * (2 * k))
            psi = np.tensordot(op, psi, axes=(range(k, 2 * k), gate.targets))
            psi = np.moveaxis(psi, range(k), gate.targets)
    return psi.reshape(-1)


def dense_expectation(circuit: Circuit, observable: np.ndarray) -> float:
    psi = statevector(circuit)
    return float(np.real(psi.conj() @ observable @ psi))


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------

def tomography_estimate(plan: ExperimentPlan, system_prep: Circuit,
                        observable: np.ndarray, rate: float) -> float:
    """Unmitigated baseline: Tr[rho H] on the noisy prepared state."""
    model = None
    if plan.noise_kind != "none" and rate > 0.0:
        model = nz.make_noise_model(plan.noise_kind, rate)
    rho = sm.apply_circuit(
        sm.DensityMatrix.computational(plan.num_qubits), system_prep, model)
    return float(np.real(np.trace(rho.matrix @ observable)))


def vpe_estimate(plan: ExperimentPlan, decomp: hm.HamiltonianDecomposition,
                 prep: Circuit, rate: float,
                 rng: np.random.Generator | None = None) -> float:
    return vpe.verified_expectation(
        decomp, prep, mode=plan.mode, shots=plan.shots,
        estimator=plan.estimator, rng=rng,
        noise=_noise_model(plan, rate), config=_estimator_config(plan))


# ---------------------------------------------------------------------------
# Error sweeps
# ---------------------------------------------------------------------------

def _replicate_rows(plan: ExperimentPlan,
                    decomp: hm.HamiltonianDecomposition,
                    observable: np.ndarray, replicate: int):
    rng = np.random.default_rng([plan.seed, replicate])
    params = az.random_parameters(plan.ansatz, plan.num_qubits, plan.layers,
                                  rng)
    ansatz_circ = _ansatz_circuit(plan, params)
    system_prep = _system_prep(plan, ansatz_circ)
    prep = _protocol_prep(plan, ansatz_circ)
    truth = dense_expectation(system_prep, observable)
    rows: list[SweepRow] = []
    failures: list[tuple[float, int, str]] = []
    noiseless: dict[str, float] = {}
    for kind in ("vpe", "tomography"):
        for rate_index, rate in enumerate((0.0,) + tuple(plan.rates)):
            try:
                if kind == "vpe":
                    sample_rng = np.random.default_rng(
                        [plan.seed, replicate, rate_index])
                    est = vpe_estimate(plan, decomp, prep, rate, sample_rng)
                else:
                    est = tomography_estimate(plan, system_prep, observable,
                                              rate)
            except SimulationError as exc:
                failures.append((rate, replicate, f"{kind}: {exc}"))
                continue
            err = abs(est - truth)
            if rate == 0.0:
                noiseless[kind] = err
            else:
                rows.append(SweepRow(rate, replicate, kind, err))
    return rows, failures, noiseless


def run_error_sweep(plan: ExperimentPlan) -> SweepResult:
    """Error-vs-noise-rate sweep of VPE and the tomography baseline.

    For each replicate: draw ansatz parameters, compute the dense-oracle
    truth by direct matrix algebra, then both estimators at every rate (and
    at rate zero, which feeds the noiseless floor).  Failed replicates are
    recorded in `failures`.
    """
    decomp = build_decomposition(plan)
    observable = decomp.total_matrix()
    result = SweepResult(plan.name, tuple(plan.rates))
    floor_samples: dict[str, list[float]] = {"vpe": [], "tomography": []}

    def work(replicate: int):
        return _replicate_rows(plan, decomp, observable, replicate)

    if plan.threads > 1:
        with ThreadPoolExecutor(max_workers=plan.threads) as pool:
            outputs = list(pool.map(work, range(plan.replicates)))
    else:
        outputs = [work(r) for r in range(plan.replicates)]
    for rows, failures, noiseless in outputs:
        result.rows.extend(rows)
        result.failures.extend(failures)
        for kind, err in noiseless.items():
            floor_samples[kind].append(err)
    for kind, errs in floor_samples.items():
        if errs:
            result.floors[kind] = float(np.median(errs))
    result.rows.sort(key=lambda r: (r.rate, r.replicate, r.estimator))
    return result


def run_split_noise(plan: ExperimentPlan) -> dict[str, SweepResult]:
    """Sweeps with noise restricted to the control or the system register."""
    if plan.protocol != "single_control":
        raise SimulationError("split-noise study needs single-control VPE")
    out = {}
    for mask in ("all", "control_only", "system_only"):
        out[mask] = run_error_sweep(replace(
            plan, name=f"{plan.name}-{mask}", noise_mask=mask))
    return out


def run_termwise(plan: ExperimentPlan) -> dict[str, SweepResult]:
    """Per-summand error sweeps; keys are summand labels plus `_summary`.

    The `most_sensitive` entry of the summary names the summand whose error
    grows at the lowest order in the noise rate (smallest log-log slope).
    """
    decomp = build_decomposition(plan)
    results: dict[str, SweepResult] = {}
    slopes: dict[str, float] = {}
    for index, summand in enumerate(decomp.summands):
        sub = hm.HamiltonianDecomposition(plan.num_qubits)
        sub.summands.append(summand)
        label = f"summand-{index}"
        observable = summand.matrix()
        sub_plan = replace(plan, name=f"{plan.name}-{label}")
        result = SweepResult(sub_plan.name, tuple(sub_plan.rates))
        floor_samples: dict[str, list[float]] = {"vpe": [],
                                                 "tomography": []}
        for replicate in range(sub_plan.replicates):
            rows, failures, noiseless = _replicate_rows(
                sub_plan, sub, observable, replicate)
            result.rows.extend(rows)
            result.failures.extend(failures)
            for kind, err in noiseless.items():
                floor_samples[kind].append(err)
        for kind, errs in floor_samples.items():
            if errs:
                result.floors[kind] = float(np.median(errs))
        result.rows.sort(key=lambda r: (r.rate, r.replicate, r.estimator))
        results[label] = result
        slopes[label] = result.slope("vpe", "rms")
    finite = {k: s for k, s in slopes.items() if math.isfinite(s)}
    most = min(finite, key=finite.get) if finite else None
    results["_summary"] = {"slopes": slopes, "most_sensitive": most}
    return results


# ---------------------------------------------------------------------------
# Variational loop
# ---------------------------------------------------------------------------

@dataclass
class VqeResult:
    trajectory: list[tuple[tuple[float, ...], float]]
    best_parameters: tuple[float, ...]
    best_energy: float
    converged: bool
    exact_ground_energy: float
    final_errors: dict[str, float]


def run_vqe_loop(plan: ExperimentPlan,
                 optimizer: str = "nelder-mead") -> VqeResult:
    """Derivative-free minimization of the chosen estimator.

    The optimizer treats the estimator as a black box; the full evaluation
    trajectory is recorded.  A zero budget returns the initial point
    unevaluated by the optimizer (flagged converged=False).
    """
    if optimizer not in ("nelder-mead", "powell"):
        raise SimulationError(f"unsupported optimizer {optimizer!r}")
    decomp = build_decomposition(plan)
    observable = decomp.total_matrix()
    rate = plan.rates[0] if (plan.rates and plan.noise_kind != "none") else 0.0
    rng = np.random.default_rng([plan.seed, 0])
    theta0 = np.array(az.random_parameters(
        plan.ansatz, plan.num_qubits, plan.layers, rng))
    trajectory: list[tuple[tuple[float, ...], float]] = []

    def objective(theta):
        ansatz_circ = _ansatz_circuit(plan, theta)
        if plan.objective == "tomography":
            value = tomography_estimate(
                plan, _system_prep(plan, ansatz_circ), observable, rate)
        else:
            value = vpe_estimate(plan, decomp, _protocol_prep(
                plan, ansatz_circ), rate)
        trajectory.append((tuple(float(x) for x in theta), float(value)))
        return value

    exact_ground = decomp.ground_energy()
    if plan.budget == 0:
        best_theta, converged = theta0, False
        best_value = objective(theta0)
        trajectory.pop()
    else:
        # Local simplex searches restarted from fresh random draws until the
        # evaluation budget runs out; the best local minimum wins.
        method = "Nelder-Mead" if optimizer == "nelder-mead" else "Powell"
        best_theta, best_value, converged = theta0, np.inf, False
        start = theta0
        restart_rng = np.random.default_rng([plan.seed, 1])
        while len(trajectory) < plan.budget:
            remaining = plan.budget - len(trajectory)
            res = minimize(objective, start, method=method,
                           options={"maxfev": remaining, "xatol": 1e-10,
                                    "fatol": 1e-13}
                           if method == "Nelder-Mead"
                           else {"maxfev": remaining})
            if res.fun < best_value:
                best_theta, best_value = np.array(res.x), float(res.fun)
                converged = bool(res.success)
            start = np.array(az.random_parameters(
                plan.ansatz, plan.num_qubits, plan.layers, restart_rng))
    ansatz_circ = _ansatz_circuit(plan, best_theta)
    final_errors = {
        "vpe": abs(vpe_estimate(plan, decomp,
                                _protocol_prep(plan, ansatz_circ), rate)
                   - exact_ground),
        "tomography": abs(tomography_estimate(
            plan, _system_prep(plan, ansatz_circ), observable, rate)
            - exact_ground),
    }
    return VqeResult(trajectory, tuple(float(x) for x in best_theta),
                     float(best_value), converged, exact_ground, final_errors)


# ---------------------------------------------------------------------------
# Sampling convergence
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceResult:
    shot_list: tuple[int, ...]
    median_errors: dict[str, np.ndarray]   # method -> per-M medians
    slopes: dict[str, float]

    METHODS = ("vpe_prony", "vpe_known_fit", "tomography")


def _minimum_parameters(plan: ExperimentPlan) -> np.ndarray:
    """Parameters of the noiseless variational minimum (tomography loop)."""
    loop = replace(plan, experiment="vqe", noise_kind="none",
                   objective="tomography", budget=plan.budget or 500)
    return np.array(run_vqe_loop(loop).best_parameters)


def run_sampling_convergence(plan: ExperimentPlan,
                             parameters=None) -> ConvergenceResult:
    """Estimator error vs shot count at a fixed state.

    Verified-branch probabilities are exact and computed once per time-grid
    point; trials then draw shot outcomes from those distributions, which is
    statistically identical to per-shot simulation but fast enough for
    hundreds of trials.
    """
    decomp = build_decomposition(plan)
    observable = decomp.total_matrix()
    if parameters is None:
        parameters = _minimum_parameters(plan)
    ansatz_circ = _ansatz_circuit(plan, parameters)
    system_prep = _system_prep(plan, ansatz_circ)
    prep = _protocol_prep(plan, ansatz_circ)
    truth = dense_expectation(system_prep, observable)
    config = _estimator_config(plan)
    branches = vpe.control_noise_compilation(config)
    noise = _noise_model(plan, plan.rates[0]) if plan.noise_kind != "none" \
        else None

    # Exact verified-outcome probabilities per (summand, t, basis, branch).
    tables = []
    for summand in decomp.summands:
        t_grid = vpe.default_t_grid(summand, "prony")
        cfg = config
        if plan.protocol == "control_free":
            cfg = vpe.VerifiedEstimatorConfig(
                protocol="control_free",
                basis_flip_50pct=config.basis_flip_50pct,
                z_quarter_rotation=config.z_quarter_rotation,
                reference_eigenvalue=summand.reference_eigenvalue)
        probs = np.empty((len(t_grid), 2, len(branches), 2))
        for i, t in enumerate(t_grid):
            evolution = summand.evolution(
                t, control=plan.protocol == "single_control")
            for bi, basis in enumerate(("x", "y")):
                for ki, branch in enumerate(branches):
                    probs[i, bi, ki] = vpe.verified_tally_probabilities(
                        prep, evolution, basis, noise, cfg, branch)
        tables.append((summand, t_grid, cfg, probs))

    # Exact eigenbasis distributions for sampled tomography.
    rho = sm.apply_circuit(sm.DensityMatrix.computational(plan.num_qubits),
                           system_prep, noise)
    tomo = []
    for summand in decomp.summands:
        vals, vecs = np.linalg.eigh(summand.matrix())
        p = np.real(np.einsum("ij,jk,ki->i", vecs.conj().T,
                              rho.matrix, vecs))
        p = np.clip(p, 0.0, None)
        tomo.append((vals, p / p.sum()))

    medians = {m: np.zeros(len(plan.shot_list))
               for m in ConvergenceResult.METHODS}
    for mi, shots in enumerate(plan.shot_list):
        errs = {m: [] for m in ConvergenceResult.METHODS}
        per_branch = max(1, shots // len(branches))
        m_total = per_branch * len(branches)
        for trial in range(plan.trials):
            rng = np.random.default_rng([plan.seed, mi, trial])
            vpe_totals = {"vpe_prony": decomp.constant,
                          "vpe_known_fit": decomp.constant}
            try:
                for summand, t_grid, cfg, probs in tables:
                    g = np.empty(len(t_grid), dtype=complex)
                    for i, t in enumerate(t_grid):
                        comp = []
                        for bi in range(2):
                            tally = 0
                            for ki, branch in enumerate(branches):
                                p_plus, p_minus = probs[i, bi, ki]
                                three = np.array([max(p_plus, 0.0),
                                                  max(p_minus, 0.0), 0.0])
                                three[2] = max(0.0, 1.0 - three[:2].sum())
                                kp, km, _ = rng.multinomial(
                                    per_branch, three / three.sum())
                                tally += branch.sign * (int(kp) - int(km))
                            comp.append(tally / m_total)
                        gval = comp[0] + 1j * comp[1]
                        if cfg.protocol == "control_free":
                            gval *= np.exp(
                                1j * cfg.reference_eigenvalue * t)
                        g[i] = gval
                    record = vpe.PhaseFunctionRecord(
                        t_grid, g, m_total, "sampled")
                    order = min(len(summand.known_eigenvalues) + 2,
                                len(t_grid) // 2)
                    vpe_totals["vpe_prony"] += pp.renormalized_expectation(
                        pp.prony(record, max(order, 2)))
                    vpe_totals["vpe_known_fit"] += \
                        pp.renormalized_expectation(pp.fit_known_phases(
                            record, summand.known_eigenvalues))
                for method in ("vpe_prony", "vpe_known_fit"):
                    errs[method].append(abs(vpe_totals[method] - truth))
            except SimulationError:
                # A fully extinguished signal at tiny M is recorded as a
                # maximal-error trial rather than dropped.
                for method in ("vpe_prony", "vpe_known_fit"):
                    errs[method].append(abs(truth) + 1.0)
            total = decomp.constant
            for vals, p in tomo:
                counts = rng.multinomial(shots, p)
                total += float(counts @ vals) / shots
            errs["tomography"].append(abs(total - truth))
        for method in ConvergenceResult.METHODS:
            medians[method][mi] = float(np.median(errs[method]))
    slopes = {}
    for method in ConvergenceResult.METHODS:
        x = np.log10(np.asarray(plan.shot_list, dtype=float))
        y = np.log10(np.maximum(medians[method], 1e-300))
        slopes[method] = float(np.polyfit(x, y, 1)[0])
    return ConvergenceResult(tuple(plan.shot_list), medians, slopes)


# ---------------------------------------------------------------------------
# Built-in paper-replication plans
# ---------------------------------------------------------------------------

PRESETS: dict[str, ExperimentPlan] = {
    "givens-depol": ExperimentPlan(
        name="givens-depol", hamiltonian="hopping-chain",
        decomposition="quadratic", ansatz="givens", protocol="control_free",
        estimator="prony", noise_kind="depolarizing"),
    "givens-damping": ExperimentPlan(
        name="givens-damping", hamiltonian="hopping-chain",
        decomposition="quadratic", ansatz="givens", protocol="control_free",
        estimator="prony", noise_kind="amplitude_phase_damping"),
    "tfim-sweep": ExperimentPlan(
        name="tfim-sweep", hamiltonian="tfim", decomposition="pauli-groups",
        ansatz="vha", layers=2, protocol="single_control",
        estimator="known_phase_fit", noise_kind="depolarizing",
        mode="exact_tally", basis_flip_50pct=True, z_quarter_rotation=True),
    "tfim-vqe": ExperimentPlan(
        name="tfim-vqe", experiment="vqe", hamiltonian="tfim",
        decomposition="pauli-groups", ansatz="vha", layers=2,
        protocol="single_control", estimator="known_phase_fit",
        noise_kind="none", budget=500),
    "fsw-pauli": ExperimentPlan(
        name="fsw-pauli", hamiltonian="h2-2.0",
        decomposition="pauli-groups", ansatz="fsw", layers=4,
        protocol="control_free", estimator="known_phase_fit",
        noise_kind="amplitude_phase_damping", replicates=20),
    "fsw-lowrank": ExperimentPlan(
        name="fsw-lowrank", hamiltonian="h2-2.0", decomposition="low-rank",
        ansatz="fsw", layers=4, protocol="control_free",
        estimator="known_phase_fit", noise_kind="depolarizing",
        replicates=20),
    "sampling-convergence": ExperimentPlan(
        name="sampling-convergence", experiment="sampling_convergence",
        hamiltonian="tfim", decomposition="pauli-groups", ansatz="vha",
        layers=2, protocol="single_control", noise_kind="none",
        trials=200),
    "split-noise": ExperimentPlan(
        name="split-noise", experiment="split_noise", hamiltonian="tfim",
        decomposition="pauli-groups", ansatz="vha", layers=2,
        protocol="single_control", estimator="known_phase_fit",
        noise_kind="depolarizing", mode="exact_tally", replicates=10,
        basis_flip_50pct=True, z_quarter_rotation=True),
    "termwise": ExperimentPlan(
        name="termwise", experiment="termwise", hamiltonian="h2-2.0",
        decomposition="pauli-groups", ansatz="fsw", layers=4,
        protocol="control_free", estimator="known_phase_fit",
        noise_kind="amplitude_damping", replicates=10),
    "vqe-control-error": ExperimentPlan(
        name="vqe-control-error", experiment="vqe",
        hamiltonian="hopping-chain", decomposition="quadratic",
        ansatz="givens", protocol="control_free", estimator="prony",
        noise_kind="amplitude_phase_damping", rates=(1e-3,),
        control_error=0.05, budget=300),
}


def run_experiment(plan: ExperimentPlan):
    """Dispatch a plan to its experiment implementation."""
    if plan.experiment == "error_sweep":
        return run_error_sweep(plan)
    if plan.experiment == "vqe":
        return run_vqe_loop(plan)
    if plan.experiment == "sampling_convergence":
        return run_sampling_convergence(plan)
    if plan.experiment == "split_noise":
        return run_split_noise(plan)
    if plan.experiment == "termwise":
        return run_termwise(plan)
    raise SimulationError(f"unknown experiment {plan.experiment!r}")
