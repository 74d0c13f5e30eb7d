"""Exact density-matrix simulation of small qubit registers.

Conventions
-----------
Qubit 0 is the most significant bit of a computational-basis index, so
for a 3-qubit register the basis state |q0 q1 q2> = |110> has index 6.

Operations return new :class:`DensityMatrix` values; invariants are
checked at explicit construction time (``validate=True``) and skipped on
the internal fast path so that long circuits do not pay an eigensolve
per moment.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ATOL_UNITARY = 1e-12
ATOL_CHANNEL = 1e-10
ATOL_STATE = 1e-10

# Single-qubit constants used across the package.
I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S = np.diag([1, 1j]).astype(complex)
SDG = np.diag([1, -1j]).astype(complex)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}

CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
ISWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1j, 0], [0, 1j, 0, 0], [0, 0, 0, 1]], dtype=complex
)


def phase_gate(angle: float) -> np.ndarray:
    """diag(1, e^{i*angle}) on one qubit."""
    return np.diag([1.0, np.exp(1j * angle)]).astype(complex)


def rz_exponential(angle: float) -> np.ndarray:
    """e^{i*angle*Z} = diag(e^{i*angle}, e^{-i*angle})."""
    return np.diag([np.exp(1j * angle), np.exp(-1j * angle)]).astype(complex)


class SimulationError(ValueError):
    """Raised on malformed gates, channels, states or circuits."""


def _check_targets(targets, num_qubits):
    if len(set(targets)) != len(targets):
        raise SimulationError(f"repeated target qubits: {targets}")
    for q in targets:
        if not 0 <= q < num_qubits:
            raise SimulationError(
                f"target qubit {q} out of range for {num_qubits} qubits"
            )


def _embed(op: np.ndarray, targets: tuple[int, ...], num_qubits: int) -> np.ndarray:
    """Expand an operator on `targets` to the full register.

    The operator is given in the tensor basis of the listed targets (in
    order, first target most significant).
    """
    k = len(targets)
    dim = 1 << num_qubits
    if op.shape != (1 << k, 1 << k):
        raise SimulationError(
            f"operator shape {op.shape} does not match {k} target qubits"
        )
    rest = [q for q in range(num_qubits) if q not in targets]
    order = list(targets) + rest
    # perm[i] = index of basis state i in the (targets, rest) qubit ordering
    perm = np.zeros(dim, dtype=np.intp)
    for i in range(dim):
        j = 0
        for q in order:
            j = (j << 1) | ((i >> (num_qubits - 1 - q)) & 1)
        perm[i] = j
    full = np.kron(op, np.eye(1 << (num_qubits - k), dtype=complex))
    return full[np.ix_(perm, perm)]


@dataclass(frozen=True)
class PureState:
    """Statevector on `num_qubits` qubits; L2-normalized."""

    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (1 << self.num_qubits,):
            raise SimulationError("amplitude vector has wrong length")
        if abs(np.linalg.norm(amps) - 1.0) > 1e-12:
            raise SimulationError("statevector is not normalized")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def computational(cls, num_qubits: int, index: int = 0) -> "PureState":
        amps = np.zeros(1 << num_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(num_qubits, amps)

    def density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(self.num_qubits, np.outer(self.amplitudes, self.amplitudes.conj()))


class DensityMatrix:
    """2^N x 2^N Hermitian PSD operator, possibly sub-normalized.

    Verified ensembles carry trace <= 1, which is why `normalized` is an
    explicit flag rather than an invariant.
    """

    def __init__(self, num_qubits: int, matrix: np.ndarray, *, normalized: bool = True,
                 validate: bool = True):
        self.num_qubits = num_qubits
        self.matrix = np.asarray(matrix, dtype=complex)
        self.normalized = normalized
        dim = 1 << num_qubits
        if self.matrix.shape != (dim, dim):
            raise SimulationError(
                f"matrix shape {self.matrix.shape} does not match {num_qubits} qubits"
            )
        if validate:
            self.validate()

    def validate(self, atol: float = ATOL_STATE) -> None:
        m = self.matrix
        if np.abs(m - m.conj().T).max() > atol:
            raise SimulationError("density matrix is not Hermitian")
        evals = np.linalg.eigvalsh(m)
        if evals.min() < -atol:
            raise SimulationError(f"density matrix not PSD (min eigenvalue {evals.min()})")
        tr = float(np.real(np.trace(m)))
        if self.normalized:
            if abs(tr - 1.0) > atol:
                raise SimulationError(f"normalized state has trace {tr}")
        elif not -atol <= tr <= 1.0 + atol:
            raise SimulationError(f"sub-normalized state has trace {tr}")

    @classmethod
    def computational(cls, num_qubits: int, index: int = 0) -> "DensityMatrix":
        dim = 1 << num_qubits
        m = np.zeros((dim, dim), dtype=complex)
        m[index, index] = 1.0
        return cls(num_qubits, m, validate=False)

    @classmethod
    def from_pure(cls, state: PureState) -> "DensityMatrix":
        return state.density_matrix()

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    @property
    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def diagonal(self) -> np.ndarray:
        return np.real(np.diag(self.matrix)).copy()


@dataclass(frozen=True)
class Gate:
    """Unitary on an ordered tuple of target qubits."""

    targets: tuple[int, ...]
    unitary: np.ndarray
    label: str = ""

    def __post_init__(self):
        targets = tuple(int(q) for q in self.targets)
        object.__setattr__(self, "targets", targets)
        u = np.asarray(self.unitary, dtype=complex)
        object.__setattr__(self, "unitary", u)
        dim = 1 << len(targets)
        if u.shape != (dim, dim):
            raise SimulationError(
                f"unitary shape {u.shape} does not match {len(targets)} targets"
            )
        if len(set(targets)) != len(targets):
            raise SimulationError(f"repeated targets in gate: {targets}")
        if np.abs(u.conj().T @ u - np.eye(dim)).max() > 1e-10:
            raise SimulationError("gate matrix is not unitary")

    def inverse(self) -> "Gate":
        return Gate(self.targets, self.unitary.conj().T, label=self.label + "^-1")


@dataclass(frozen=True)
class Moment:
    """Parallel gates with pairwise-disjoint targets."""

    gates: tuple[Gate, ...]

    def __post_init__(self):
        gates = tuple(self.gates)
        object.__setattr__(self, "gates", gates)
        seen: set[int] = set()
        for g in gates:
            for q in g.targets:
                if q in seen:
                    raise SimulationError(f"qubit {q} appears twice in one moment")
                seen.add(q)

    def qubits(self) -> set[int]:
        return {q for g in self.gates for q in g.targets}


class Circuit:
    """Ordered list of moments on a fixed-size register."""

    def __init__(self, num_qubits: int, moments=()):
        self.num_qubits = num_qubits
        self.moments: list[Moment] = []
        for m in moments:
            self.append(m)

    def append(self, item) -> "Circuit":
        """Append a Moment, a Gate (as its own moment), or a list of Gates."""
        if isinstance(item, Gate):
            item = Moment((item,))
        elif isinstance(item, (list, tuple)):
            item = Moment(tuple(item))
        for g in item.gates:
            _check_targets(g.targets, self.num_qubits)
        self.moments.append(item)
        return self

    def extend(self, other: "Circuit") -> "Circuit":
        if other.num_qubits != self.num_qubits:
            raise SimulationError("qubit count mismatch in circuit concatenation")
        self.moments.extend(other.moments)
        return self

    @property
    def depth(self) -> int:
        return len(self.moments)

    def inverse(self) -> "Circuit":
        inv = Circuit(self.num_qubits)
        for m in reversed(self.moments):
            inv.append(Moment(tuple(g.inverse() for g in m.gates)))
        return inv

    def shifted(self, offset: int, num_qubits: int) -> "Circuit":
        """The same circuit on a larger register with all targets shifted."""
        out = Circuit(num_qubits)
        for m in self.moments:
            out.append(
                Moment(tuple(Gate(tuple(q + offset for q in g.targets), g.unitary, g.label)
                             for g in m.gates))
            )
        return out

    def unitary(self) -> np.ndarray:
        """Full-register unitary (small registers only)."""
        dim = 1 << self.num_qubits
        u = np.eye(dim, dtype=complex)
        for m in self.moments:
            for g in m.gates:
                u = _embed(g.unitary, g.targets, self.num_qubits) @ u
        return u

    def gate_count(self) -> int:
        return sum(len(m.gates) for m in self.moments)


class KrausChannel:
    """Trace-preserving channel given by a list of Kraus operators."""

    def __init__(self, operators, label: str = ""):
        ops = [np.asarray(k, dtype=complex) for k in operators]
        if not ops:
            raise SimulationError("channel needs at least one Kraus operator")
        dim = ops[0].shape[0]
        for k in ops:
            if k.shape != (dim, dim):
                raise SimulationError("Kraus operators must share one square dimension")
        total = sum(k.conj().T @ k for k in ops)
        if np.abs(total - np.eye(dim)).max() > ATOL_CHANNEL:
            raise SimulationError("Kraus operators do not satisfy completeness")
        self.operators = ops
        self.label = label
        self.num_qubits = int(round(np.log2(dim)))

    def compose(self, other: "KrausChannel") -> "KrausChannel":
        """Channel equal to `self` applied after `other`."""
        return KrausChannel(
            [a @ b for a in self.operators for b in other.operators],
            label=f"{self.label}*{other.label}",
        )

    def is_identity(self) -> bool:
        dim = self.operators[0].shape[0]
        total = np.zeros((dim, dim), dtype=complex)
        for k in self.operators:
            total += k * np.trace(k.conj().T) / dim
        acc = sum(np.abs(k - np.eye(dim) * k[0, 0]).max() for k in self.operators)
        return len(self.operators) == 1 and acc < 1e-12


def identity_channel(num_qubits: int = 1) -> KrausChannel:
    return KrausChannel([np.eye(1 << num_qubits, dtype=complex)], label="id")


def apply_gate(state: DensityMatrix, gate: Gate) -> DensityMatrix:
    _check_targets(gate.targets, state.num_qubits)
    u = _embed(gate.unitary, gate.targets, state.num_qubits)
    return DensityMatrix(
        state.num_qubits, u @ state.matrix @ u.conj().T,
        normalized=state.normalized, validate=False,
    )


def apply_channel(state: DensityMatrix, channel: KrausChannel, targets) -> DensityMatrix:
    targets = tuple(targets)
    _check_targets(targets, state.num_qubits)
    if channel.num_qubits != len(targets):
        raise SimulationError(
            f"channel acts on {channel.num_qubits} qubits, got {len(targets)} targets"
        )
    out = np.zeros_like(state.matrix)
    for k in channel.operators:
        kk = _embed(k, targets, state.num_qubits)
        out += kk @ state.matrix @ kk.conj().T
    return DensityMatrix(state.num_qubits, out, normalized=state.normalized, validate=False)


def apply_circuit(state: DensityMatrix, circuit: Circuit, noise=None) -> DensityMatrix:
    """Run a circuit, optionally inserting per-qubit noise after every moment.

    `noise` is a :class:`vpelab.noise.NoiseModel` (or None).  Channels are
    applied to every qubit after every moment, idle qubits included.
    """
    if circuit.num_qubits != state.num_qubits:
        raise SimulationError("circuit and state qubit counts differ")
    rho = state.matrix.copy()
    n = state.num_qubits
    for moment in circuit.moments:
        for g in moment.gates:
            u = _embed(g.unitary, g.targets, n)
            rho = u @ rho @ u.conj().T
        if noise is not None:
            rho = noise.apply_moment(rho, n)
    return DensityMatrix(n, rho, normalized=state.normalized, validate=False)


def expectation(state: DensityMatrix, observable) -> float:
    """Trace[rho O] for a Hermitian observable (matrix or PauliSum)."""
    obs = observable.matrix() if hasattr(observable, "matrix") and callable(observable.matrix) else np.asarray(observable, dtype=complex)
    if obs.shape != state.matrix.shape:
        raise SimulationError("observable dimension mismatch")
    value = np.trace(state.matrix @ obs)
    if abs(value.imag) > 1e-8:
        raise SimulationError(
            f"expectation has imaginary part {value.imag}; observable not Hermitian?"
        )
    return float(value.real)


def partial_trace(state: DensityMatrix, keep) -> DensityMatrix:
    keep = tuple(keep)
    if not keep:
        raise SimulationError("must keep at least one qubit")
    _check_targets(keep, state.num_qubits)
    n = state.num_qubits
    traced = tuple(q for q in range(n) if q not in keep)
    tensor = state.matrix.reshape([2] * (2 * n))
    # axes: row qubits 0..n-1, col qubits n..2n-1
    for q in sorted(traced, reverse=True):
        tensor = np.trace(tensor, axis1=q, axis2=q + tensor.ndim // 2)
    dim = 1 << len(keep)
    # remaining row/col axes follow the ascending order of kept qubits; map to
    # the requested `keep` order
    ascending = sorted(keep)
    order = [ascending.index(q) for q in keep]
    k = len(keep)
    tensor = tensor.transpose(order + [k + o for o in order])
    return DensityMatrix(
        len(keep), tensor.reshape(dim, dim),
        normalized=state.normalized, validate=False,
    )


def sample_measurement(state: DensityMatrix, rng: np.random.Generator,
                       rotations=None) -> tuple[int, ...]:
    """Draw one computational-basis outcome after optional pre-rotations."""
    rho = state
    if rotations is not None:
        if isinstance(rotations, Circuit):
            rho = apply_circuit(rho, rotations)
        else:
            for g in rotations:
                rho = apply_gate(rho, g)
    probs = rho.diagonal()
    total = rho.trace
    if abs(probs.sum() - total) > 1e-8:
        raise SimulationError("probabilities do not sum to the state trace")
    probs = np.clip(probs, 0.0, None)
    probs = probs / probs.sum()
    index = int(rng.choice(len(probs), p=probs))
    n = state.num_qubits
    return tuple((index >> (n - 1 - q)) & 1 for q in range(n))
