"""Matchgate (Givens-rotation) circuits for number-conserving mode rotations.

A matchgate circuit W on N qubits is characterized by its single-particle
matrix u: W maps the single-excitation state |e_j> (only mode/qubit j
occupied) to sum_k u_{kj} |e_k>, and acts on every other particle-number
sector as the corresponding free-fermion (Slater determinant) rotation.
Nearest-neighbour two-mode rotations plus single-qubit phases suffice to
realize any u.
"""

from __future__ import annotations

import numpy as np

from vpelab.sim import Circuit, Gate, Moment, SimulationError, phase_gate


def matchgate(block: np.ndarray, label: str = "mg") -> np.ndarray:
    """4x4 gate realizing a 2x2 single-particle rotation on adjacent modes.

    `block` is the unitary action on the ordered mode pair (j, j+1); the
    doubly-occupied state picks up det(block).
    """
    b = np.asarray(block, dtype=complex)
    g = np.zeros((4, 4), dtype=complex)
    g[0, 0] = 1.0
    # |10> (index 2) is mode j occupied; |01> (index 1) is mode j+1.
    g[2, 2] = b[0, 0]
    g[1, 2] = b[1, 0]
    g[2, 1] = b[0, 1]
    g[1, 1] = b[1, 1]
    g[3, 3] = np.linalg.det(b)
    return g


def givens_block(theta: float, phi: float = 0.0) -> np.ndarray:
    """2x2 Givens rotation with optional phase."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array(
        [[c, -np.exp(1j * phi) * s], [np.exp(-1j * phi) * s, c]], dtype=complex
    )


def givens_gate(qubit: int, theta: float, phi: float = 0.0) -> Gate:
    return Gate((qubit, qubit + 1), matchgate(givens_block(theta, phi)),
                label=f"givens({theta:.4f})")


def brick_pairs(n: int) -> list[list[tuple[int, int]]]:
    """The alternating brick pattern: n layers, n(n-1)/2 pairs total."""
    layers = []
    for layer in range(n):
        start = layer % 2
        layers.append([(j, j + 1) for j in range(start, n - 1, 2)])
    return layers


def brick_network(thetas, n: int) -> Circuit:
    """Depth-n brick-pattern Givens network with one angle per rotation."""
    thetas = np.asarray(thetas, dtype=float)
    expected = n * (n - 1) // 2
    if thetas.shape != (expected,):
        raise SimulationError(
            f"expected {expected} angles for {n} modes, got {thetas.shape}"
        )
    circuit = Circuit(n)
    k = 0
    for layer in brick_pairs(n):
        gates = []
        for (a, _b) in layer:
            gates.append(givens_gate(a, thetas[k]))
            k += 1
        circuit.append(Moment(tuple(gates)))
    return circuit


def single_particle_matrix(circuit: Circuit) -> np.ndarray:
    """Restrict a number-conserving circuit to its single-excitation sector."""
    n = circuit.num_qubits
    full = circuit.unitary()
    idx = [1 << (n - 1 - j) for j in range(n)]
    return full[np.ix_(idx, idx)]


def decompose_single_particle(u: np.ndarray) -> Circuit:
    """Matchgate circuit whose single-particle matrix equals `u`.

    Works by QR-style elimination with rotations on adjacent rows,
    leaving a diagonal of phases realized as single-qubit gates.
    """
    u = np.asarray(u, dtype=complex)
    n = u.shape[0]
    if u.shape != (n, n) or np.abs(u.conj().T @ u - np.eye(n)).max() > 1e-9:
        raise SimulationError("single-particle matrix is not unitary")
    working = u.copy()
    rotations: list[tuple[int, np.ndarray]] = []
    for col in range(n - 1):
        for row in range(n - 1, col, -1):
            a, b = working[row - 1, col], working[row, col]
            if abs(b) < 1e-14:
                continue
            r = np.sqrt(abs(a) ** 2 + abs(b) ** 2)
            g = np.array([[a.conjugate(), b.conjugate()], [-b, a]], dtype=complex) / r
            working[row - 1:row + 1, :] = g @ working[row - 1:row + 1, :]
            rotations.append((row - 1, g))
    phases = np.angle(np.diag(working))
    circuit = Circuit(n)
    if np.abs(phases).max() > 1e-14:
        circuit.append(Moment(tuple(
            Gate((j,), phase_gate(phases[j]), label="ph") for j in range(n)
            if abs(phases[j]) > 1e-14
        )))
    # u = G_1^dag ... G_m^dag D; gates applied D first, then G_m^dag .. G_1^dag
    for row, g in reversed(rotations):
        circuit.append(Gate((row, row + 1), matchgate(g.conj().T), label="givens"))
    return circuit


def pack_moments(circuit: Circuit) -> Circuit:
    """Greedy left-alignment of gates into fewer moments (same operator)."""
    packed = Circuit(circuit.num_qubits)
    frontier: list[set[int]] = []
    moments: list[list[Gate]] = []
    for m in circuit.moments:
        for g in m.gates:
            targets = set(g.targets)
            slot = len(moments)
            while slot > 0 and not (frontier[slot - 1] & targets):
                slot -= 1
            if slot == len(moments):
                moments.append([])
                frontier.append(set())
            moments[slot].append(g)
            for later in range(slot, len(moments)):
                frontier[later] |= targets
    for gates in moments:
        packed.append(Moment(tuple(gates)))
    return packed


def merge_networks(first: Circuit, second: Circuit) -> Circuit:
    """Single matchgate circuit equal to `first` followed by `second`."""
    u = single_particle_matrix(second) @ single_particle_matrix(first)
    return pack_moments(decompose_single_particle(u))
