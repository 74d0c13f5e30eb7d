"""Density-matrix simulation and verified phase estimation (VPE).

The package is organized around the main stages of a verified
expectation-value estimation experiment:

- :mod:`vpelab.sim` -- exact density-matrix circuit simulation.
- :mod:`vpelab.noise` -- noise channels and per-qubit-per-moment models.
- :mod:`vpelab.hamiltonians` -- Pauli/fermionic operators and
  fast-forwardable decompositions with compiled evolution circuits.
- :mod:`vpelab.ansatz` -- state-preparation circuits (Givens networks,
  VHA layers, fermionic-swap networks, GHZ-style reference prep).
- :mod:`vpelab.vpe` -- the verification protocols (exact and sampled,
  single-control, control-free and parallel).
- :mod:`vpelab.postprocess` -- classical signal processing of phase
  functions into eigenvalue/amplitude pairs and renormalized
  expectation values.
- :mod:`vpelab.experiments` -- reusable sweep/VQE/convergence studies.
- :mod:`vpelab.cli` -- command-line front end.
"""

from vpelab.sim import (
    Circuit,
    DensityMatrix,
    Gate,
    KrausChannel,
    Moment,
    PureState,
    apply_channel,
    apply_circuit,
    apply_gate,
    expectation,
    partial_trace,
    sample_measurement,
)

__all__ = [
    "Circuit",
    "DensityMatrix",
    "Gate",
    "KrausChannel",
    "Moment",
    "PureState",
    "apply_channel",
    "apply_circuit",
    "apply_gate",
    "expectation",
    "partial_trace",
    "sample_measurement",
]

__version__ = "0.1.0"
