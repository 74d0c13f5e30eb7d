"""State-preparation circuits.

Includes Givens-rotation networks for fermionic Slater determinants, GHZ-type
superposition preparation, a variational Hamiltonian ansatz for the
transverse-field Ising model, fermionic swap networks, and the composed
preparation unitary used by control-free verified phase estimation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from vpelab.givens import (
    brick_network,
    decompose_single_particle,
    merge_networks,
    single_particle_matrix,
)
from vpelab.sim import (
    CNOT,
    Circuit,
    Gate,
    H as H_GATE,
    Moment,
    PAULI,
    SimulationError,
    phase_gate,
    rz_exponential,
)

SQRT_ISWAP = np.array(
    [[1, 0, 0, 0],
     [0, 1 / np.sqrt(2), 1j / np.sqrt(2), 0],
     [0, 1j / np.sqrt(2), 1 / np.sqrt(2), 0],
     [0, 0, 0, 1]],
    dtype=complex,
)


def givens_network(thetas, num_qubits: int) -> Circuit:
    """Brick-pattern Givens network of depth exactly `num_qubits`."""
    return brick_network(thetas, num_qubits)


def givens_parameter_count(num_qubits: int) -> int:
    return num_qubits * (num_qubits - 1) // 2


def ghz_prep(occupation: int, num_qubits: int) -> Circuit:
    """Map |0…0⟩ to (|0…0⟩ + |1⟩^{⊗occupation}|0…0⟩)/√2.

    Hadamard on qubit 0 followed by a CNOT chain down the first
    `occupation` qubits.
    """
    if not 1 <= occupation <= num_qubits:
        raise SimulationError("occupation out of range")
    circuit = Circuit(num_qubits)
    circuit.append(Gate((0,), H_GATE, label="H"))
    for j in range(occupation - 1):
        circuit.append(Gate((j, j + 1), CNOT, label="CNOT"))
    return circuit


def _xx_rotation(theta: float) -> np.ndarray:
    """e^{i theta X⊗X}."""
    xx = np.kron(PAULI["X"], PAULI["X"])
    return np.cos(theta) * np.eye(4) + 1j * np.sin(theta) * xx


def vha_circuit(thetas, layers: int, num_qubits: int) -> Circuit:
    """Variational Hamiltonian ansatz for the periodic TFIM.

    Alternates e^{i θ_{p,Z} Σ Z_j} and e^{i θ_{p,X} Σ X_j X_{j+1}} layers,
    each compiled exactly (terms within a layer commute).
    """
    thetas = np.asarray(thetas, dtype=float)
    if thetas.shape != (2 * layers,):
        raise SimulationError(
            f"expected {2 * layers} parameters, got {thetas.shape}")
    circuit = Circuit(num_qubits)
    # The coupling layer comes first: on the |0...0> starting state a leading
    # field layer is only a global phase, which would waste one parameter.
    for p in range(layers):
        th_x, th_z = thetas[2 * p], thetas[2 * p + 1]
        if abs(th_x) > 0:
            for j in range(num_qubits):
                k = (j + 1) % num_qubits
                circuit.append(Gate((j, k), _xx_rotation(th_x), label="xx"))
        if abs(th_z) > 0:
            circuit.append(Moment(tuple(
                Gate((j,), rz_exponential(th_z), label="rz")
                for j in range(num_qubits)
            )))
    return circuit


def fsim_matrix(theta: float, phi: float) -> np.ndarray:
    """Fermionic simulation gate: excitation hop by i·sin(θ), |11⟩ phase e^{iφ}."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array(
        [[1, 0, 0, 0],
         [0, c, 1j * s, 0],
         [0, 1j * s, c, 0],
         [0, 0, 0, np.exp(1j * phi)]],
        dtype=complex,
    )


def fsim_gate(qubit: int, theta: float, phi: float) -> Gate:
    return Gate((qubit, qubit + 1), fsim_matrix(theta, phi),
                label=f"fsim({theta:.4f},{phi:.4f})")


def _fsw_layers(layers: int, num_qubits: int) -> list[list[tuple[int, int]]]:
    return [[(j, j + 1) for j in range(i % 2, num_qubits - 1, 2)]
            for i in range(layers)]


def fsw_parameter_count(layers: int, num_qubits: int) -> int:
    return 2 * sum(len(layer) for layer in _fsw_layers(layers, num_qubits))


def fsw_network(params, layers: int, num_qubits: int) -> Circuit:
    """Linear fermionic-swap-style network of fsim gates, (θ, φ) per gate."""
    pairs = _fsw_layers(layers, num_qubits)
    count = 2 * sum(len(layer) for layer in pairs)
    params = np.asarray(params, dtype=float)
    if params.size != count:
        raise SimulationError(f"expected {count} parameters, got {params.size}")
    params = params.reshape(-1, 2)
    circuit = Circuit(num_qubits)
    k = 0
    for layer in pairs:
        gates = []
        for (a, _b) in layer:
            theta, phi = params[k]
            gates.append(fsim_gate(a, theta, phi))
            k += 1
        circuit.append(Moment(tuple(gates)))
    return circuit


def conserves_number(circuit: Circuit, tol: float = 1e-10) -> bool:
    """Check the circuit commutes with total Σ Z_j as a dense matrix."""
    n = circuit.num_qubits
    diag = np.zeros(2 ** n)
    for idx in range(2 ** n):
        diag[idx] = n - 2 * bin(idx).count("1")
    u = circuit.unitary()
    return bool(np.abs(u * diag[None, :] - diag[:, None] * u).max() <= tol)


def _is_matchgate_network(circuit: Circuit) -> bool:
    """True when the circuit equals the free-fermion lift of its own
    single-particle matrix (i.e. it is mergeable with other Givens networks)."""
    if not conserves_number(circuit):
        return False
    u = single_particle_matrix(circuit)
    rebuilt = decompose_single_particle(u)
    return bool(np.abs(rebuilt.unitary() - circuit.unitary()).max() <= 1e-8)


def compose_prep_for_control_free(ansatz: Circuit,
                                  basis_rotation: Circuit | None = None,
                                  occupation: int = 1) -> Circuit:
    """Preparation unitary U_p for control-free verified phase estimation.

    U_p maps |0…0⟩ to the reference state (the vacuum image) and |10…0⟩ to
    the ansatz state: a CNOT chain spreads the flagged qubit into an
    `occupation`-mode Fock state, then the ansatz (merged with the optional
    basis rotation when both are Givens networks) acts on top.
    """
    n = ansatz.num_qubits
    if not conserves_number(ansatz):
        raise SimulationError("ansatz does not conserve particle number")
    circuit = Circuit(n)
    for j in range(occupation - 1):
        circuit.append(Gate((j, j + 1), CNOT, label="CNOT"))
    if basis_rotation is None:
        network = ansatz
    elif _is_matchgate_network(ansatz) and _is_matchgate_network(basis_rotation):
        network = merge_networks(ansatz, basis_rotation)
    else:
        network = Circuit(n)
        network.extend(ansatz)
        network.extend(basis_rotation)
    circuit.extend(network)
    return circuit


def givens_sqrt_iswap_gates(qubit: int, theta: float) -> list[Gate]:
    """A Givens rotation as two √ISWAP gates plus single-qubit phases.

    Matches the matchgate form of givens_gate(qubit, theta) exactly.
    """
    a, b = qubit, qubit + 1
    return [
        Gate((a,), phase_gate(np.pi), label="ph"),
        Gate((a, b), SQRT_ISWAP, label="sqrt_iswap"),
        Gate((a,), phase_gate(np.pi - theta), label="ph"),
        Gate((b,), phase_gate(theta), label="ph"),
        Gate((a, b), SQRT_ISWAP, label="sqrt_iswap"),
    ]


def compile_givens_to_sqrt_iswap(circuit: Circuit) -> Circuit:
    """Re-express every Givens matchgate through √ISWAP gates."""
    out = Circuit(circuit.num_qubits)
    for moment in circuit.moments:
        for gate in moment.gates:
            if gate.label.startswith("givens") and len(gate.targets) == 2:
                theta = _givens_angle(gate)
                for g in givens_sqrt_iswap_gates(gate.targets[0], theta):
                    out.append(g)
            else:
                out.append(gate)
    return out


def _givens_angle(gate: Gate) -> float:
    u = gate.unitary
    if (abs(u[0, 0] - 1) > 1e-9 or abs(u[3, 3] - 1) > 1e-9
            or abs(u[1, 1].imag) > 1e-9 or abs(u[2, 1].imag) > 1e-9):
        raise SimulationError("gate is not a plain Givens rotation")
    return float(np.arctan2(-u[2, 1].real, u[1, 1].real))


def perturb_sqrt_iswap(circuit: Circuit, offsets) -> Circuit:
    """Replace each √ISWAP with ISWAP^(1/2 + x) for per-gate offsets x."""
    from vpelab.noise import iswap_power

    offsets = list(offsets)
    out = Circuit(circuit.num_qubits)
    k = 0
    for moment in circuit.moments:
        for gate in moment.gates:
            if gate.label == "sqrt_iswap":
                out.append(Gate(gate.targets, iswap_power(0.5 + offsets[k]),
                                label="sqrt_iswap_perturbed"))
                k += 1
            else:
                out.append(gate)
    if k != len(offsets):
        raise SimulationError(
            f"circuit has {k} sqrt-iswap gates, got {len(offsets)} offsets")
    return out


def count_sqrt_iswap(circuit: Circuit) -> int:
    return sum(1 for m in circuit.moments for g in m.gates
               if g.label == "sqrt_iswap")


@dataclass(frozen=True)
class AnsatzSpec:
    """Declarative ansatz description used in experiment configs."""

    kind: str
    parameters: tuple[float, ...]
    num_qubits: int
    layers: int = 0
    occupation: int = 0

    def __post_init__(self):
        if self.kind not in ("givens", "vha", "fsw"):
            raise SimulationError(f"unknown ansatz kind {self.kind!r}")
        n = self.num_qubits
        if self.kind == "givens":
            expected = givens_parameter_count(n)
        elif self.kind == "vha":
            expected = 2 * self.layers
        else:
            expected = 2 * sum(len(l) for l in _fsw_layers(self.layers, n))
        if len(self.parameters) != expected:
            raise SimulationError(
                f"{self.kind} ansatz needs {expected} parameters, "
                f"got {len(self.parameters)}")

    def build(self) -> Circuit:
        if self.kind == "givens":
            return givens_network(self.parameters, self.num_qubits)
        if self.kind == "vha":
            return vha_circuit(self.parameters, self.layers, self.num_qubits)
        return fsw_network(self.parameters, self.layers, self.num_qubits)


def random_parameters(kind: str, num_qubits: int, layers: int,
                      rng: np.random.Generator) -> tuple[float, ...]:
    """Uniform angles in [−π, π], the documented initialization."""
    if kind == "givens":
        count = givens_parameter_count(num_qubits)
    elif kind == "vha":
        count = 2 * layers
    elif kind == "fsw":
        count = 2 * sum(len(l) for l in _fsw_layers(layers, num_qubits))
    else:
        raise SimulationError(f"unknown ansatz kind {kind!r}")
    return tuple(rng.uniform(-np.pi, np.pi, count))
