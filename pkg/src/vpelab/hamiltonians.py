"""Operator representations and fast-forwardable time-evolution compilers.

Covers Pauli sums, fermionic operators with the Jordan-Wigner mapping,
quadratic (free-fermion) Hamiltonians diagonalized by Givens networks, and
low-rank factorized two-body Hamiltonians.  Each decomposition summand can
compile exact circuits for e^{iH_s t}, optionally controlled on an ancilla.

Qubit 0 is the most significant bit of a computational basis index, and
fermionic mode j maps to qubit j under Jordan-Wigner.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from vpelab.givens import decompose_single_particle, pack_moments
from vpelab.sim import (
    Circuit,
    Gate,
    H as H_GATE,
    I2,
    Moment,
    PAULI,
    SDG,
    SimulationError,
    phase_gate,
    rz_exponential,
)

_LETTERS = "IXYZ"

# Single-letter products: _PROD[(a, b)] = (phase, letter) with a.b = phase*letter.
_PROD = {}
for _a in _LETTERS:
    for _b in _LETTERS:
        m = PAULI[_a] @ PAULI[_b]
        for _c in _LETTERS:
            for ph in (1, -1, 1j, -1j):
                if np.allclose(m, ph * PAULI[_c]):
                    _PROD[(_a, _b)] = (ph, _c)


def multiply_patterns(p1: str, p2: str) -> tuple[complex, str]:
    """Product of two Pauli letter patterns as (phase, pattern)."""
    phase = 1.0 + 0.0j
    out = []
    for a, b in zip(p1, p2):
        ph, c = _PROD[(a, b)]
        phase *= ph
        out.append(c)
    return phase, "".join(out)


def patterns_commute(p1: str, p2: str) -> bool:
    """Two Pauli strings commute iff they anticommute on an even # of sites."""
    odd = sum(1 for a, b in zip(p1, p2) if a != "I" and b != "I" and a != b)
    return odd % 2 == 0


@dataclass(frozen=True)
class PauliString:
    """A single Pauli letter pattern with a real coefficient."""

    num_qubits: int
    letters: tuple[str, ...]
    coefficient: float

    def __post_init__(self):
        if len(self.letters) != self.num_qubits:
            raise SimulationError("letter count does not match qubit count")
        if any(l not in _LETTERS for l in self.letters):
            raise SimulationError(f"invalid Pauli letters {self.letters}")

    @property
    def pattern(self) -> str:
        return "".join(self.letters)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(j for j, l in enumerate(self.letters) if l != "I")

    def matrix(self) -> np.ndarray:
        m = np.array([[self.coefficient]], dtype=complex)
        for l in self.letters:
            m = np.kron(m, PAULI[l])
        return m

    def __repr__(self):
        body = " ".join(f"{l}{j}" for j, l in enumerate(self.letters) if l != "I")
        return f"{self.coefficient:+g} {body or 'I'}"


class PauliSum:
    """A sum of Pauli strings with merged duplicate patterns."""

    def __init__(self, num_qubits: int, terms=None, hermitian: bool = True):
        self.num_qubits = num_qubits
        self._terms: dict[str, complex] = {}
        self.hermitian = hermitian
        for pattern, coeff in dict(terms or {}).items():
            self.add_term(pattern, coeff)

    def add_term(self, pattern: str, coeff: complex) -> None:
        if len(pattern) != self.num_qubits:
            raise SimulationError("pattern length does not match qubit count")
        new = self._terms.get(pattern, 0.0) + complex(coeff)
        if abs(new) < 1e-14:
            self._terms.pop(pattern, None)
        else:
            self._terms[pattern] = new

    @property
    def term_dict(self) -> dict[str, complex]:
        return dict(self._terms)

    @property
    def terms(self) -> list[PauliString]:
        out = []
        for pattern, coeff in sorted(self._terms.items()):
            if abs(coeff.imag) > 1e-10:
                raise SimulationError(
                    f"non-Hermitian coefficient {coeff} for {pattern}"
                )
            out.append(PauliString(self.num_qubits, tuple(pattern), coeff.real))
        return out

    @property
    def num_terms(self) -> int:
        return len(self._terms)

    @property
    def constant(self) -> complex:
        return self._terms.get("I" * self.num_qubits, 0.0)

    def without_identity(self) -> "PauliSum":
        terms = {p: c for p, c in self._terms.items()
                 if p != "I" * self.num_qubits}
        return PauliSum(self.num_qubits, terms, self.hermitian)

    def matrix(self) -> np.ndarray:
        dim = 2 ** self.num_qubits
        m = np.zeros((dim, dim), dtype=complex)
        for pattern, coeff in self._terms.items():
            term = np.array([[coeff]], dtype=complex)
            for l in pattern:
                term = np.kron(term, PAULI[l])
            m += term
        return m

    def one_norm(self) -> float:
        return float(sum(abs(c) for c in self._terms.values()))

    def all_commute(self) -> bool:
        patterns = list(self._terms)
        return all(
            patterns_commute(patterns[i], patterns[j])
            for i in range(len(patterns))
            for j in range(i + 1, len(patterns))
        )

    def scaled(self, factor: complex) -> "PauliSum":
        out = PauliSum(self.num_qubits, hermitian=self.hermitian)
        for p, c in self._terms.items():
            out.add_term(p, factor * c)
        return out

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if other.num_qubits != self.num_qubits:
            raise SimulationError("qubit count mismatch")
        out = PauliSum(self.num_qubits, self._terms,
                       self.hermitian and other.hermitian)
        for p, c in other._terms.items():
            out.add_term(p, c)
        return out

    def __repr__(self):
        if not self._terms:
            return "PauliSum(0)"
        return "PauliSum(" + " ".join(map(repr, self.terms)) + ")"


class FermionOperator:
    """A sum of products of fermionic creation/annihilation operators.

    Terms are keyed by an ordered tuple of (mode, is_creation) pairs; the
    empty tuple is the constant term.
    """

    def __init__(self, num_modes: int, terms=None):
        self.num_modes = num_modes
        self.terms: dict[tuple, complex] = {}
        for ops, coeff in dict(terms or {}).items():
            self.add_term(ops, coeff)

    def add_term(self, ops, coeff: complex) -> None:
        ops = tuple((int(m), bool(d)) for m, d in ops)
        if any(m < 0 or m >= self.num_modes for m, _ in ops):
            raise SimulationError(f"mode index out of range in {ops}")
        new = self.terms.get(ops, 0.0) + complex(coeff)
        if abs(new) < 1e-14:
            self.terms.pop(ops, None)
        else:
            self.terms[ops] = new

    def adjoint(self) -> "FermionOperator":
        out = FermionOperator(self.num_modes)
        for ops, coeff in self.terms.items():
            out.add_term(tuple((m, not d) for m, d in reversed(ops)),
                         coeff.conjugate())
        return out

    def is_number_conserving(self) -> bool:
        return all(
            sum(1 for _, d in ops if d) == sum(1 for _, d in ops if not d)
            for ops in self.terms
        )

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        m = jordan_wigner(self).matrix()
        return bool(np.abs(m - m.conj().T).max() <= max(tol, 1e-12))

    def __add__(self, other: "FermionOperator") -> "FermionOperator":
        out = FermionOperator(max(self.num_modes, other.num_modes), self.terms)
        for ops, c in other.terms.items():
            out.add_term(ops, c)
        return out

    def scaled(self, factor: complex) -> "FermionOperator":
        out = FermionOperator(self.num_modes)
        for ops, c in self.terms.items():
            out.add_term(ops, factor * c)
        return out

    def __repr__(self):
        parts = []
        for ops, c in sorted(self.terms.items()):
            body = " ".join(("+" if d else "-") + str(m) for m, d in ops)
            parts.append(f"({c:g}) {body or '1'}")
        return "FermionOperator(" + " + ".join(parts or ["0"]) + ")"


def _ladder_pattern(num_qubits: int, mode: int, dagger: bool) -> dict[str, complex]:
    """Jordan-Wigner image of c_mode or c†_mode as {pattern: coeff}."""
    x = ["Z"] * mode + ["X"] + ["I"] * (num_qubits - mode - 1)
    y = ["Z"] * mode + ["Y"] + ["I"] * (num_qubits - mode - 1)
    sign = -1j if dagger else 1j
    return {"".join(x): 0.5, "".join(y): 0.5 * sign}


def jordan_wigner(op: FermionOperator) -> PauliSum:
    """Map a fermionic operator to qubits (mode j -> qubit j, qubit 0 = MSB)."""
    n = op.num_modes
    acc: dict[str, complex] = {}
    for ops, coeff in op.terms.items():
        partial = {"I" * n: complex(coeff)}
        for mode, dagger in ops:
            factor = _ladder_pattern(n, mode, dagger)
            nxt: dict[str, complex] = {}
            for p1, c1 in partial.items():
                for p2, c2 in factor.items():
                    ph, p = multiply_patterns(p1, p2)
                    nxt[p] = nxt.get(p, 0.0) + ph * c1 * c2
            partial = nxt
        for p, c in partial.items():
            acc[p] = acc.get(p, 0.0) + c
    acc = {p: c for p, c in acc.items() if abs(c) > 1e-14}
    hermitian = all(abs(c.imag) <= 1e-10 for c in acc.values())
    return PauliSum(n, acc, hermitian=hermitian)


def build_hopping_chain(num_sites: int, hopping: float,
                        periodic: bool = True) -> FermionOperator:
    """Free-fermion chain −t Σ_j (c†_j c_{j+1} + h.c.) with wrap-around bond."""
    if num_sites < 2:
        raise SimulationError("need at least two sites")
    op = FermionOperator(num_sites)
    bonds = range(num_sites) if periodic else range(num_sites - 1)
    for j in bonds:
        k = (j + 1) % num_sites
        op.add_term(((j, True), (k, False)), -hopping)
        op.add_term(((k, True), (j, False)), -hopping)
    return op


def hopping_matrix(num_sites: int, hopping: float,
                   periodic: bool = True) -> np.ndarray:
    """Single-particle (mode) matrix of the hopping chain."""
    t = np.zeros((num_sites, num_sites))
    bonds = range(num_sites) if periodic else range(num_sites - 1)
    for j in bonds:
        k = (j + 1) % num_sites
        t[j, k] -= hopping
        t[k, j] -= hopping
    return t


def build_tfim(num_sites: int, j_z: float, j_x: float) -> PauliSum:
    """Transverse-field Ising model J_z Σ Z_j + J_x Σ X_j X_{j+1} (periodic)."""
    if num_sites < 2:
        raise SimulationError("need at least two sites")
    psum = PauliSum(num_sites)
    for j in range(num_sites):
        if j_z != 0.0:
            letters = ["I"] * num_sites
            letters[j] = "Z"
            psum.add_term("".join(letters), j_z)
        if j_x != 0.0:
            letters = ["I"] * num_sites
            letters[j] = "X"
            letters[(j + 1) % num_sites] = "X"
            psum.add_term("".join(letters), j_x)
    return psum


@dataclass(frozen=True)
class GivensSequence:
    """Basis change V with input = V† diag(ε) V, realized as a circuit.

    The circuit's single-particle matrix equals `matrix` (= V).
    """

    matrix: np.ndarray
    circuit: Circuit


def diagonalize_quadratic(t_matrix: np.ndarray) -> tuple[np.ndarray, GivensSequence]:
    """Eigenvalues and Givens-network basis change of a Hermitian mode matrix."""
    t_matrix = np.asarray(t_matrix, dtype=complex)
    if np.abs(t_matrix - t_matrix.conj().T).max() > 1e-10:
        raise SimulationError("mode matrix is not Hermitian")
    n = t_matrix.shape[0]
    off = t_matrix - np.diag(np.diag(t_matrix))
    if np.abs(off).max() < 1e-14:
        return np.real(np.diag(t_matrix)).copy(), GivensSequence(
            np.eye(n, dtype=complex), Circuit(n))
    eps, q = np.linalg.eigh(t_matrix)
    v = q.conj().T
    return eps, GivensSequence(v, pack_moments(decompose_single_particle(v)))


# ---------------------------------------------------------------------------
# Exact evolution compilers
# ---------------------------------------------------------------------------

_Y_BASIS = H_GATE @ SDG          # maps Y to Z under conjugation
_Y_BASIS_INV = _Y_BASIS.conj().T


def cphase(angle: float) -> np.ndarray:
    """diag(1, 1, 1, e^{i angle}) on an ordered qubit pair."""
    return np.diag([1.0, 1.0, 1.0, np.exp(1j * angle)]).astype(complex)


def pauli_exponential(pattern: str, angle: float,
                      control: bool = False) -> Circuit:
    """Circuit for e^{i angle P}; optionally controlled on a fresh qubit 0.

    When controlled, the system pattern acts on qubits 1..n and only the
    phase-bearing rotation is conditioned; basis changes cancel at control=0.
    """
    n = len(pattern)
    offset = 1 if control else 0
    circ = Circuit(n + offset)
    support = [j for j, l in enumerate(pattern) if l != "I"]
    if not support:
        if control:
            circ.append(Gate((0,), phase_gate(angle), label="ctrl-phase"))
        elif abs(angle) > 0:
            circ.append(Gate((0,), np.exp(1j * angle) * I2, label="global-phase"))
        return circ
    if all(pattern[j] == "Z" for j in support):
        # Pure-Z strings exponentiate to a diagonal (number-conserving) gate;
        # compiling them this way keeps the evolution inside fixed-excitation
        # sectors, so verification retains its higher-order error suppression.
        k = len(support)
        parity = np.array([(-1) ** bin(b).count("1") for b in range(1 << k)])
        diag = np.exp(1j * angle * parity)
        if control:
            full = np.concatenate([np.ones(1 << k), diag])
            circ.append(Gate(tuple([0] + [j + offset for j in support]),
                             np.diag(full).astype(complex), label="ctrl-zphase"))
        else:
            circ.append(Gate(tuple(j + offset for j in support),
                             np.diag(diag).astype(complex), label="zphase"))
        return circ
    pre = []
    for j in support:
        if pattern[j] == "X":
            pre.append(Gate((j + offset,), H_GATE, label="H"))
        elif pattern[j] == "Y":
            pre.append(Gate((j + offset,), _Y_BASIS, label="y-basis"))
    if pre:
        circ.append(Moment(tuple(pre)))
    ladder = [Gate((support[i] + offset, support[i + 1] + offset),
                   np.array([[1, 0, 0, 0], [0, 1, 0, 0],
                             [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
                   label="CNOT")
              for i in range(len(support) - 1)]
    for g in ladder:
        circ.append(g)
    last = support[-1] + offset
    if control:
        circ.append(Gate((0, last),
                         np.diag([1, 1, np.exp(1j * angle),
                                  np.exp(-1j * angle)]).astype(complex),
                         label="ctrl-rz"))
    else:
        circ.append(Gate((last,), rz_exponential(angle), label="rz"))
    for g in reversed(ladder):
        circ.append(g)
    if pre:
        circ.append(Moment(tuple(
            Gate(g.targets, g.unitary.conj().T, label=g.label + "-inv")
            for g in pre
        )))
    return circ


def pauli_sum_evolution(psum: PauliSum, t: float,
                        control: bool = False) -> Circuit:
    """Exact e^{iHt} for a mutually commuting Pauli sum."""
    if not psum.all_commute():
        raise SimulationError("Pauli strings do not all commute")
    circ = Circuit(psum.num_qubits + (1 if control else 0))
    for term in psum.terms:
        circ.extend(pauli_exponential(term.pattern, term.coefficient * t,
                                      control=control))
    return circ


def _controlled_phase_moments(circ: Circuit, qubits: list[int],
                              angles: list[float], control: bool) -> None:
    """Append per-mode phases e^{i angle n_q}, optionally controlled by qubit 0."""
    # Zero-angle phases are kept so the circuit depth (and hence the noise
    # accumulated per run) is identical for every t, including t = 0.  Uniform
    # damping of g(t) across the grid is what renormalization cancels.
    gates = []
    for q, angle in zip(qubits, angles):
        if control:
            gates.append(Gate((0, q), cphase(angle), label="cphase"))
        else:
            gates.append(Gate((q,), phase_gate(angle), label="phase"))
    if control:
        for g in gates:
            circ.append(g)
    else:
        circ.append(Moment(tuple(gates)))


def quadratic_evolution(t_matrix: np.ndarray, t: float,
                        control: bool = False) -> Circuit:
    """Exact e^{iHt} for H = Σ_{jk} T_{jk} c†_j c_k via a Givens network."""
    eps, seq = diagonalize_quadratic(t_matrix)
    n = t_matrix.shape[0]
    offset = 1 if control else 0
    circ = Circuit(n + offset)
    basis = seq.circuit.shifted(offset, n + offset) if control else seq.circuit
    circ.extend(basis)
    _controlled_phase_moments(
        circ, [j + offset for j in range(n)], list(eps * t), control)
    circ.extend(basis.inverse())
    return circ


def _ccphase_gates(control: int, a: int, b: int, angle: float) -> list[Gate]:
    """Phase e^{i angle} on |1⟩_c|1⟩_a|1⟩_b from two-qubit gates only.

    Uses c·a·b = (c·a + c·b − c·(a⊕b))/2.
    """
    cnot = np.array([[1, 0, 0, 0], [0, 1, 0, 0],
                     [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
    return [
        Gate((control, a), cphase(angle / 2), label="cphase"),
        Gate((control, b), cphase(angle / 2), label="cphase"),
        Gate((a, b), cnot, label="CNOT"),
        Gate((control, b), cphase(-angle / 2), label="cphase"),
        Gate((a, b), cnot, label="CNOT"),
    ]


@dataclass(frozen=True)
class LowRankFactor:
    """One factor H^(l) = W† (Σ_α ε_α n_α)² W of a two-body decomposition.

    `basis` is an optional extra mode rotation applied before the factor's own
    eigenbasis; `t_matrix` is the Hermitian mode matrix whose square is taken.
    """

    t_matrix: np.ndarray
    basis: np.ndarray | None = None

    def mode_matrix(self) -> np.ndarray:
        g = np.asarray(self.t_matrix, dtype=complex)
        if self.basis is None:
            return g
        u = np.asarray(self.basis, dtype=complex)
        return u.conj().T @ g @ u


def low_rank_factor_matrix(factor: LowRankFactor, num_modes: int) -> np.ndarray:
    """Dense many-body matrix of one squared low-rank factor."""
    g = factor.mode_matrix()
    quad = FermionOperator(num_modes)
    for i in range(num_modes):
        for j in range(num_modes):
            if abs(g[i, j]) > 1e-14:
                quad.add_term(((i, True), (j, False)), g[i, j])
    a = jordan_wigner(quad).matrix()
    return a @ a


def low_rank_evolution(factors: list[LowRankFactor], t: float,
                       num_modes: int | None = None,
                       control: bool = False) -> Circuit:
    """Exact Π_l e^{i H^(l) t} with H^(l) a squared quadratic form.

    In the factor eigenbasis the phase on occupations m is
    t·(Σ ε_α m_α)² = t·Σ ε_α² m_α + 2t·Σ_{α<β} ε_α ε_β m_α m_β, realized by
    single-mode phases and two-mode C-phase gates.
    """
    if num_modes is None:
        if not factors:
            raise SimulationError("no factors and no mode count given")
        num_modes = factors[0].mode_matrix().shape[0]
    n = num_modes
    offset = 1 if control else 0
    circ = Circuit(n + offset)
    for factor in factors:
        g = factor.mode_matrix()
        if g.shape != (n, n):
            raise SimulationError("factor mode count mismatch")
        eps, q = np.linalg.eigh(g)
        w = q.conj().T
        basis = pack_moments(decompose_single_particle(w))
        if control:
            basis = basis.shifted(offset, n + offset)
        circ.extend(basis)
        _controlled_phase_moments(
            circ, [a + offset for a in range(n)], list(eps ** 2 * t), control)
        for a in range(n):
            for b in range(a + 1, n):
                angle = 2.0 * eps[a] * eps[b] * t
                if abs(eps[a] * eps[b]) < 1e-15:
                    continue
                if control:
                    for gate in _ccphase_gates(0, a + offset, b + offset, angle):
                        circ.append(gate)
                else:
                    circ.append(Gate((a, b), cphase(angle), label="cphase"))
        circ.extend(basis.inverse())
    return circ


# ---------------------------------------------------------------------------
# Decomposition into fast-forwardable summands
# ---------------------------------------------------------------------------

class Summand:
    """One fast-forwardable piece H_s of a Hamiltonian decomposition."""

    label: str
    num_qubits: int
    known_eigenvalues: np.ndarray | None
    reference_eigenvalue: float | None

    def matrix(self) -> np.ndarray:
        raise NotImplementedError

    def evolution(self, t: float, control: bool = False) -> Circuit:
        raise NotImplementedError

    def _finish(self) -> None:
        """Fill eigenvalue bookkeeping from the dense matrix."""
        m = self.matrix()
        eigs = np.linalg.eigvalsh(m)
        unique = []
        for e in eigs:
            if not unique or abs(e - unique[-1]) > 1e-9:
                unique.append(float(e))
        self.known_eigenvalues = np.array(unique)
        column = m[:, 0]
        if np.abs(column[1:]).max() < 1e-10 and abs(column[0].imag) < 1e-10:
            self.reference_eigenvalue = float(column[0].real)
        else:
            self.reference_eigenvalue = None


class PauliGroupSummand(Summand):
    """A mutually commuting group of Pauli strings."""

    def __init__(self, label: str, pauli_sum: PauliSum):
        if not pauli_sum.all_commute():
            raise SimulationError(f"summand {label!r} strings do not commute")
        self.label = label
        self.pauli_sum = pauli_sum
        self.num_qubits = pauli_sum.num_qubits
        self._finish()

    def matrix(self) -> np.ndarray:
        return self.pauli_sum.matrix()

    def evolution(self, t: float, control: bool = False) -> Circuit:
        return pauli_sum_evolution(self.pauli_sum, t, control=control)


class QuadraticSummand(Summand):
    """A number-conserving quadratic fermionic Hamiltonian."""

    def __init__(self, label: str, t_matrix: np.ndarray):
        self.label = label
        self.t_matrix = np.asarray(t_matrix, dtype=complex)
        self.num_qubits = self.t_matrix.shape[0]
        self._finish()

    def matrix(self) -> np.ndarray:
        quad = FermionOperator(self.num_qubits)
        for i in range(self.num_qubits):
            for j in range(self.num_qubits):
                if abs(self.t_matrix[i, j]) > 1e-14:
                    quad.add_term(((i, True), (j, False)), self.t_matrix[i, j])
        return jordan_wigner(quad).matrix()

    def evolution(self, t: float, control: bool = False) -> Circuit:
        return quadratic_evolution(self.t_matrix, t, control=control)


class LowRankSummand(Summand):
    """One squared-quadratic factor of a low-rank two-body decomposition."""

    def __init__(self, label: str, factor: LowRankFactor):
        self.label = label
        self.factor = factor
        self.num_qubits = factor.mode_matrix().shape[0]
        self._finish()

    def matrix(self) -> np.ndarray:
        return low_rank_factor_matrix(self.factor, self.num_qubits)

    def evolution(self, t: float, control: bool = False) -> Circuit:
        return low_rank_evolution([self.factor], t,
                                  num_modes=self.num_qubits, control=control)


@dataclass
class HamiltonianDecomposition:
    """A Hamiltonian split into fast-forwardable summands plus a constant."""

    num_qubits: int
    summands: list[Summand] = field(default_factory=list)
    constant: float = 0.0

    def total_matrix(self) -> np.ndarray:
        dim = 2 ** self.num_qubits
        m = self.constant * np.eye(dim, dtype=complex)
        for s in self.summands:
            m = m + s.matrix()
        return m

    def ground_energy(self) -> float:
        return float(np.linalg.eigvalsh(self.total_matrix())[0])


def decompose_number_conserving(op: FermionOperator) -> HamiltonianDecomposition:
    """Split a number-conserving fermionic operator into Hermitian summands.

    Each fermionic term is grouped with its Hermitian conjugate and mapped
    through Jordan-Wigner; groups whose Pauli patterns overlap are merged so
    that strings cancelling between related terms (e.g. the two-body
    scattering pair of an electronic-structure Hamiltonian) collapse into a
    single summand.  Identity contributions go into the constant.  Every
    summand is a mutually commuting Pauli group with the vacuum as an
    eigenstate.
    """
    if not op.is_number_conserving():
        raise SimulationError("operator does not conserve particle number")
    groups: dict[tuple, FermionOperator] = {}
    constant = 0.0
    for ops, coeff in op.terms.items():
        if not ops:
            if abs(coeff.imag) > 1e-12:
                raise SimulationError("constant term must be real")
            constant += coeff.real
            continue
        adj = tuple((m, not d) for m, d in reversed(ops))
        key = min(ops, adj)
        groups.setdefault(key, FermionOperator(op.num_modes)).add_term(ops, coeff)
    identity = "I" * op.num_modes
    pieces: list[tuple[str, PauliSum]] = []
    for key in sorted(groups):
        # The h.c. partner lands in the same group when the input lists it;
        # otherwise symmetrize so each summand is Hermitian on its own.
        psum = jordan_wigner(groups[key])
        if not psum.hermitian:
            psum = jordan_wigner(groups[key] + groups[key].adjoint())
        if abs(psum.constant) > 0:
            constant += psum.constant.real
            psum = psum.without_identity()
        if psum.num_terms:
            label = " ".join(("+" if d else "-") + str(m) for m, d in key)
            pieces.append((label, psum))
    # Merge groups that share a Pauli pattern until none overlap.
    merged = True
    while merged:
        merged = False
        for i in range(len(pieces)):
            for j in range(i + 1, len(pieces)):
                pi, pj = pieces[i][1], pieces[j][1]
                if set(pi.term_dict) & set(pj.term_dict):
                    pieces[i] = (pieces[i][0] + " | " + pieces[j][0], pi + pj)
                    del pieces[j]
                    merged = True
                    break
            if merged:
                break
    decomp = HamiltonianDecomposition(op.num_modes, constant=constant)
    for label, psum in pieces:
        if psum.num_terms:
            decomp.summands.append(PauliGroupSummand(label, psum))
    return decomp


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def _parse_line(line: str):
    tokens = line.split()
    coeff_str = tokens[-1]
    try:
        coeff = float(coeff_str)
    except ValueError as exc:
        raise SimulationError(f"bad coefficient {coeff_str!r}") from exc
    return tokens[:-1], coeff


def load_hamiltonian_file(path) -> PauliSum | FermionOperator:
    """Parse a line-oriented operator file.

    Pauli lines look like `X0 X1 0.5`; fermionic lines like `+0 -1 1.0`
    (c†_0 c_1).  A bare number is a constant (identity) term.  `#` starts a
    comment.  Formats cannot be mixed within one file.
    """
    pauli_terms: list[tuple[list[tuple[str, int]], float]] = []
    fermi_terms: list[tuple[list[tuple[int, bool]], float]] = []
    constant = 0.0
    max_index = -1
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                ops, coeff = _parse_line(line)
            except SimulationError as exc:
                raise SimulationError(f"{path}:{lineno}: {exc}") from exc
            if not ops:
                constant += coeff
                continue
            first = ops[0]
            try:
                if first[0] in "XYZI":
                    parsed = []
                    for tok in ops:
                        if tok == "I":
                            continue
                        letter, idx = tok[0], int(tok[1:])
                        if letter not in "XYZ":
                            raise ValueError(tok)
                        parsed.append((letter, idx))
                        max_index = max(max_index, idx)
                    pauli_terms.append((parsed, coeff))
                elif first[0] in "+-":
                    parsed_f = []
                    for tok in ops:
                        idx = int(tok[1:])
                        parsed_f.append((idx, tok[0] == "+"))
                        max_index = max(max_index, idx)
                    fermi_terms.append((parsed_f, coeff))
                else:
                    raise ValueError(first)
            except (ValueError, IndexError) as exc:
                raise SimulationError(
                    f"{path}:{lineno}: cannot parse token in {line!r}"
                ) from exc
    if pauli_terms and fermi_terms:
        raise SimulationError(f"{path}: mixed Pauli and fermionic terms")
    n = max_index + 1 if max_index >= 0 else 1
    if fermi_terms:
        op = FermionOperator(n)
        if constant:
            op.add_term((), constant)
        for parsed_f, coeff in fermi_terms:
            op.add_term(tuple(parsed_f), coeff)
        return op
    psum = PauliSum(n)
    if constant:
        psum.add_term("I" * n, constant)
    for parsed, coeff in pauli_terms:
        letters = ["I"] * n
        for letter, idx in parsed:
            if letters[idx] != "I":
                raise SimulationError(
                    f"{path}: repeated qubit index {idx} in a term")
            letters[idx] = letter
        psum.add_term("".join(letters), coeff)
    return psum


def load_low_rank_file(path) -> tuple[np.ndarray, list[LowRankFactor], float]:
    """Parse a JSON low-rank factor file.

    Expected keys: `one_body` (Hermitian matrix), `factors` (list of
    `{basis: matrix, eigs: vector}`), optional `constant`.
    """
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SimulationError(f"{path}: invalid JSON: {exc}") from exc
    try:
        one_body = np.array(doc["one_body"], dtype=float)
        factors = []
        for entry in doc["factors"]:
            basis = np.array(entry["basis"], dtype=float)
            eigs = np.array(entry["eigs"], dtype=float)
            factors.append(LowRankFactor(t_matrix=np.diag(eigs), basis=basis))
        constant = float(doc.get("constant", 0.0))
    except (KeyError, TypeError, ValueError) as exc:
        raise SimulationError(f"{path}: malformed factor file: {exc}") from exc
    if np.abs(one_body - one_body.conj().T).max() > 1e-10:
        raise SimulationError(f"{path}: one_body matrix is not Hermitian")
    return one_body, factors, constant


def low_rank_decomposition(one_body: np.ndarray,
                           factors: list[LowRankFactor],
                           constant: float = 0.0) -> HamiltonianDecomposition:
    """Decomposition with a quadratic summand plus squared low-rank factors."""
    n = one_body.shape[0]
    decomp = HamiltonianDecomposition(n, constant=constant)
    decomp.summands.append(QuadraticSummand("one-body", one_body))
    for i, factor in enumerate(factors):
        decomp.summands.append(LowRankSummand(f"factor-{i}", factor))
    return decomp
