"""Noise channels and per-qubit-per-moment noise models.

The model convention is a constant error rate per qubit per moment: after
every circuit moment each qubit (idle ones included) is hit by its
channel.  Masks restrict noise to the system register or the control
qubit(s) for split-noise studies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from vpelab.sim import (
    Circuit,
    DensityMatrix,
    Gate,
    ISWAP,
    KrausChannel,
    SimulationError,
    X,
    Y,
    Z,
    _embed,
    apply_circuit,
)


def depolarizing(lam: float) -> KrausChannel:
    """Single-qubit depolarizing channel of strength `lam`.

    Acts as (1 - 3*lam/4) rho + (lam/4)(X rho X + Y rho Y + Z rho Z).
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"depolarizing strength {lam} outside [0, 1]")
    i2 = np.eye(2, dtype=complex)
    return KrausChannel(
        [
            np.sqrt(1.0 - 0.75 * lam) * i2,
            np.sqrt(lam / 4.0) * X,
            np.sqrt(lam / 4.0) * Y,
            np.sqrt(lam / 4.0) * Z,
        ],
        label=f"depol({lam})",
    )


def amplitude_damping(gamma: float) -> KrausChannel:
    """Single-qubit amplitude damping toward |0>."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"damping rate {gamma} outside [0, 1]")
    k0 = np.diag([1.0, np.sqrt(1.0 - gamma)]).astype(complex)
    k1 = np.zeros((2, 2), dtype=complex)
    k1[0, 1] = np.sqrt(gamma)
    return KrausChannel([k0, k1], label=f"ampdamp({gamma})")


def phase_damping(gamma: float) -> KrausChannel:
    """Single-qubit pure dephasing."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"damping rate {gamma} outside [0, 1]")
    k0 = np.diag([1.0, np.sqrt(1.0 - gamma)]).astype(complex)
    k1 = np.diag([0.0, np.sqrt(gamma)]).astype(complex)
    return KrausChannel([k0, k1], label=f"phasedamp({gamma})")


def amplitude_phase_damping(gamma_amp: float, gamma_phase: float) -> KrausChannel:
    """Amplitude damping composed with phase damping."""
    return phase_damping(gamma_phase).compose(amplitude_damping(gamma_amp))


def bit_flip(p: float) -> KrausChannel:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"flip probability {p} outside [0, 1]")
    return KrausChannel(
        [np.sqrt(1.0 - p) * np.eye(2, dtype=complex), np.sqrt(p) * X],
        label=f"bitflip({p})",
    )


def control_error_iswap(x: float) -> np.ndarray:
    """Two-qubit unitary ISWAP^(1/2 + x); x = 0 gives sqrt(ISWAP)."""
    if not abs(x) <= 0.5:
        raise ValueError(f"offset {x} outside [-0.5, 0.5]")
    return iswap_power(0.5 + x)


def iswap_power(power: float) -> np.ndarray:
    """ISWAP^power via eigendecomposition of the (normal) ISWAP matrix."""
    evals, evecs = np.linalg.eig(ISWAP)
    return evecs @ np.diag(np.exp(power * np.log(evals))) @ evecs.conj().T


@dataclass
class NoiseModel:
    """Per-qubit channels applied every moment, plus optional extras.

    `default_channel` applies to every qubit not listed in
    `per_qubit_channel`.  `mask` (if given) limits noise to the listed
    qubits.  `readout_channel` is applied to `readout_qubits` after the
    final pre-rotation, immediately before measurement.
    `control_error_offsets` maps two-qubit-gate instance index -> offset
    x_i for the coherent ISWAP^(1/2+x) substitution.
    """

    default_channel: KrausChannel | None = None
    per_qubit_channel: dict[int, KrausChannel] = field(default_factory=dict)
    mask: frozenset[int] | None = None
    readout_channel: KrausChannel | None = None
    readout_qubits: tuple[int, ...] = ()
    control_error_offsets: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        self._embedded_cache: dict[tuple[int, int, int], list[np.ndarray]] = {}

    def channel_for(self, qubit: int) -> KrausChannel | None:
        if self.mask is not None and qubit not in self.mask:
            return None
        return self.per_qubit_channel.get(qubit, self.default_channel)

    def masked(self, qubits) -> "NoiseModel":
        """A copy of this model restricted to the given qubits."""
        return NoiseModel(
            default_channel=self.default_channel,
            per_qubit_channel=dict(self.per_qubit_channel),
            mask=frozenset(qubits),
            readout_channel=self.readout_channel,
            readout_qubits=self.readout_qubits,
            control_error_offsets=dict(self.control_error_offsets),
        )

    def shifted(self, offset: int) -> "NoiseModel":
        """Re-index qubit-specific entries after embedding in a larger register."""
        return NoiseModel(
            default_channel=self.default_channel,
            per_qubit_channel={q + offset: c for q, c in self.per_qubit_channel.items()},
            mask=None if self.mask is None else frozenset(q + offset for q in self.mask),
            readout_channel=self.readout_channel,
            readout_qubits=tuple(q + offset for q in self.readout_qubits),
            control_error_offsets=dict(self.control_error_offsets),
        )

    def apply_moment(self, rho: np.ndarray, num_qubits: int) -> np.ndarray:
        for q in range(num_qubits):
            ch = self.channel_for(q)
            if ch is None:
                continue
            ops = self._embedded(ch, q, num_qubits)
            rho = sum(k @ rho @ k.conj().T for k in ops)
        return rho

    def apply_readout(self, rho: np.ndarray, num_qubits: int) -> np.ndarray:
        if self.readout_channel is None:
            return rho
        for q in self.readout_qubits:
            ops = self._embedded(self.readout_channel, q, num_qubits)
            rho = sum(k @ rho @ k.conj().T for k in ops)
        return rho

    def _embedded(self, channel: KrausChannel, qubit: int, num_qubits: int):
        key = (id(channel), qubit, num_qubits)
        cached = self._embedded_cache.get(key)
        if cached is None:
            cached = [_embed(k, (qubit,), num_qubits) for k in channel.operators]
            self._embedded_cache[key] = cached
        return cached


def uniform_noise(channel: KrausChannel) -> NoiseModel:
    return NoiseModel(default_channel=channel)


def make_noise_model(kind: str, rate: float) -> NoiseModel:
    """Named noise models used by the experiment sweeps."""
    if rate == 0.0:
        return NoiseModel()
    if kind == "depolarizing":
        return uniform_noise(depolarizing(rate))
    if kind == "amplitude_phase_damping":
        return uniform_noise(amplitude_phase_damping(rate, rate))
    if kind == "amplitude_damping":
        return uniform_noise(amplitude_damping(rate))
    if kind == "bit_flip":
        return uniform_noise(bit_flip(rate))
    raise ValueError(f"unknown noise kind {kind!r}")


@dataclass(frozen=True)
class EvaluationPlan:
    """A circuit bound to a (possibly masked) noise model."""

    circuit: Circuit
    noise: NoiseModel | None

    def run(self, state: DensityMatrix) -> DensityMatrix:
        return apply_circuit(state, self.circuit, self.noise)


def attach_noise(circuit: Circuit, model: NoiseModel, mask: str = "all",
                 control_qubits=()) -> EvaluationPlan:
    """Bind a noise model to a circuit with an optional register mask.

    mask: "all", "system_only" (everything but `control_qubits`) or
    "control_only" (just `control_qubits`).
    """
    control = set(control_qubits)
    for q in control:
        if not 0 <= q < circuit.num_qubits:
            raise SimulationError(f"mask references unknown qubit {q}")
    if mask == "all":
        effective = model
    elif mask == "system_only":
        effective = model.masked(set(range(circuit.num_qubits)) - control)
    elif mask == "control_only":
        effective = model.masked(control)
    else:
        raise ValueError(f"unknown mask {mask!r}")
    return EvaluationPlan(circuit, effective)
