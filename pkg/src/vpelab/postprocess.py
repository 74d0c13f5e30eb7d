"""Classical post-processing of phase-function records.

Turns sampled or exact g(t) records into eigenvalue/amplitude estimates
(Prony's method or a known-eigenvalue amplitude fit) and renormalized
expectation values ⟨H⟩ = Σ A'_j E_j / Σ A'_j, which is exactly invariant
under uniform damping of the amplitudes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from vpelab.sim import SimulationError


@dataclass
class SpectralEstimate:
    """Recovered eigenvalues and nonnegative (possibly damped) amplitudes."""

    eigenvalues: np.ndarray
    amplitudes: np.ndarray
    method: str
    residual: float = 0.0
    order_reduced: bool = False

    def __post_init__(self):
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=float)
        self.amplitudes = np.asarray(self.amplitudes, dtype=float)
        if not np.all(np.isfinite(self.eigenvalues)):
            raise SimulationError("non-finite eigenvalue estimate")
        if self.amplitudes.min(initial=0.0) < -1e-9:
            raise SimulationError("negative amplitude estimate")
        self.amplitudes = np.clip(self.amplitudes, 0.0, None)


def _uniform_spacing(t_grid: np.ndarray) -> float:
    diffs = np.diff(t_grid)
    if len(diffs) == 0 or diffs.min() <= 0:
        raise SimulationError("need an increasing time grid")
    if np.abs(diffs - diffs[0]).max() > 1e-9 * max(1.0, abs(diffs[0])):
        raise SimulationError("Prony needs a uniformly spaced time grid")
    return float(diffs[0])


def _amplitude_fit(t_grid: np.ndarray, signal: np.ndarray,
                   eigenvalues: np.ndarray) -> tuple[np.ndarray, float]:
    """Nonnegative least-squares amplitudes for Σ A_j e^{iE_j t}."""
    design = np.exp(1j * np.outer(t_grid, eigenvalues))
    stacked = np.vstack([design.real, design.imag])
    target = np.concatenate([signal.real, signal.imag])
    amplitudes, residual = nnls(stacked, target)
    return amplitudes, float(residual)


def prony(record, model_order: int) -> SpectralEstimate:
    """Fit up to `model_order` complex exponentials to a uniform record.

    Linear prediction coefficients are solved by least squares, frequencies
    come from the prediction polynomial's roots, and amplitudes from a
    nonnegative least-squares fit.  Roots far from the unit circle
    (| |z|−1 | > 0.5) are discarded as numerical artifacts; a rank-deficient
    prediction system reduces the order and flags the estimate.
    """
    signal = np.asarray(record.g_estimates, dtype=complex)
    t_grid = np.asarray(record.t_grid, dtype=float)
    dt = _uniform_spacing(t_grid)
    if len(signal) < 2 * model_order:
        raise SimulationError(
            f"need at least {2 * model_order} points for order {model_order}")
    order = model_order
    reduced = False
    while order >= 1:
        rows = len(signal) - order
        a = np.empty((rows, order), dtype=complex)
        for i in range(rows):
            a[i] = signal[i:i + order]
        b = signal[order:]
        coeffs, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
        if rank == order or order == 1:
            break
        order = rank if rank >= 1 else 1
        reduced = True
    poly = np.concatenate([[1.0], -coeffs[::-1]])
    roots = np.roots(poly)
    roots = roots[np.abs(np.abs(roots) - 1.0) <= 0.5]
    if len(roots) == 0:
        raise SimulationError("no stable exponential modes found")
    eigenvalues = np.angle(roots) / dt
    amplitudes, residual = _amplitude_fit(t_grid, signal, eigenvalues)
    return SpectralEstimate(eigenvalues, amplitudes, "prony", residual,
                            order_reduced=reduced)


def _merge_degenerate(eigenvalues, tol: float = 1e-9) -> np.ndarray:
    unique: list[float] = []
    for e in sorted(float(e) for e in eigenvalues):
        if not unique or abs(e - unique[-1]) > tol:
            unique.append(e)
    return np.array(unique)


def fit_known_phases(record, eigenvalues) -> SpectralEstimate:
    """Amplitude-only fit when the eigenvalue multiset is known.

    Degenerate eigenvalues share one design column; amplitudes are
    constrained nonnegative.
    """
    if eigenvalues is None or len(eigenvalues) == 0:
        raise SimulationError("no eigenvalues supplied")
    unique = _merge_degenerate(eigenvalues)
    t_grid = np.asarray(record.t_grid, dtype=float)
    if len(t_grid) < 2:
        raise SimulationError("time grid too small to fit amplitudes")
    signal = np.asarray(record.g_estimates, dtype=complex)
    amplitudes, residual = _amplitude_fit(t_grid, signal, unique)
    return SpectralEstimate(unique, amplitudes, "known_phase_fit", residual)


def renormalized_expectation(estimate: SpectralEstimate) -> float:
    """⟨H⟩ = Σ A'_j E_j / Σ A'_j — invariant under uniform amplitude damping."""
    total = float(estimate.amplitudes.sum())
    if total <= 1e-6:
        raise SimulationError("signal lost: total verified amplitude ~ 0")
    return float((estimate.amplitudes * estimate.eigenvalues).sum() / total)


def single_point_estimate(g_t: complex, g_0: complex, t: float) -> float:
    """Short-time estimator Im[g(t)]/(t·|g(0)|), biased at O(t²)."""
    if t == 0:
        raise SimulationError("single-point estimate needs t != 0")
    if abs(g_0) <= 1e-6:
        raise SimulationError("signal lost: |g(0)| ~ 0")
    return float(np.imag(g_t) / (t * abs(g_0)))


def bias_compensate(raw: float, k_steps: int, shots: int) -> float:
    """Undo the sampling-noise bias of spectral fits on K-point records.

    Divides by 1 + √(K−2)/√M; K = 2 returns the input unchanged.
    """
    if k_steps < 2:
        raise SimulationError("need at least two time steps")
    if shots <= 0:
        raise SimulationError("need a positive shot count")
    return float(raw / (1.0 + np.sqrt(max(k_steps - 2, 0) / shots)))
