"""Quantum-circuit metrics emulated through exact eigendecomposition.

Time evolution under exp(-iHt) is applied in the eigenbasis rather than by
gate synthesis; shot noise for the Hadamard test and phase estimation is
binomial/multinomial sampling around the exact values.
"""

import math
from dataclasses import dataclass

import numpy as np

from .dyson_gas import HermitianMatrix
from .errors import DimensionMismatch, DomainError, EmptyRequest, Unsupported

_MAX_ANCILLA = 20


@dataclass(frozen=True)
class StateVector:
    """Normalized complex amplitudes (norm within 1e-10 of 1)."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        if amp.ndim != 1 or amp.size == 0:
            raise DomainError("amplitudes must be a non-empty 1-D array")
        if not np.all(np.isfinite(amp.real)) or not np.all(np.isfinite(amp.imag)):
            raise DomainError("amplitudes must be finite")
        norm = float(np.linalg.norm(amp))
        if abs(norm - 1.0) > 1e-10:
            raise DomainError(f"state norm must be 1 within 1e-10, got {norm}")
        amp = amp.copy()
        amp.flags.writeable = False
        object.__setattr__(self, "amplitudes", amp)

    @property
    def dimension(self) -> int:
        return self.amplitudes.size

    @classmethod
    def basis_state(cls, dimension: int, index: int) -> "StateVector":
        if not (0 <= index < dimension):
            raise DomainError(f"basis index {index} out of range for dimension {dimension}")
        amp = np.zeros(dimension, dtype=complex)
        amp[index] = 1.0
        return cls(amp)

    @classmethod
    def uniform(cls, dimension: int) -> "StateVector":
        if dimension < 1:
            raise DomainError(f"dimension must be >= 1, got {dimension}")
        return cls(np.full(dimension, 1.0 / math.sqrt(dimension), dtype=complex))


@dataclass(frozen=True)
class PhaseEstimate:
    """One phase-register outcome: phase = m / 2^n_ancilla."""

    phase: float
    probability: float
    n_ancilla: int

    def __post_init__(self):
        if not (0.0 <= self.phase < 1.0):
            raise DomainError(f"phase must lie in [0, 1), got {self.phase}")
        if not (0.0 <= self.probability <= 1.0):
            raise DomainError(f"probability must lie in [0, 1], got {self.probability}")


def _check_dims(h: HermitianMatrix, psi: StateVector):
    if h.dimension != psi.dimension:
        raise DimensionMismatch(
            f"matrix dimension {h.dimension} != state dimension {psi.dimension}"
        )


def _overlap_weights(h: HermitianMatrix, psi: StateVector) -> tuple:
    w, v = h.eigensystem
    c = v.conj().T @ psi.amplitudes
    return w, c


def evolve(h: HermitianMatrix, t: float, psi: StateVector) -> StateVector:
    """exp(-iHt) |psi> via the eigenbasis; t = 0 returns psi unchanged."""
    _check_dims(h, psi)
    if t == 0.0:
        return psi
    w, v = h.eigensystem
    c = v.conj().T @ psi.amplitudes
    return StateVector(v @ (np.exp(-1j * w * t) * c))


def _autocorrelation(h: HermitianMatrix, t: float, psi: StateVector) -> complex:
    """<psi| exp(-iHt) |psi> = sum_k |c_k|^2 exp(-i lambda_k t)."""
    w, c = _overlap_weights(h, psi)
    return complex(np.sum(np.abs(c) ** 2 * np.exp(-1j * w * t)))


def survival_probability(h: HermitianMatrix, t: float, psi: StateVector) -> float:
    """|<psi| exp(-iHt) |psi>|^2; exactly 1 at t = 0."""
    _check_dims(h, psi)
    if t == 0.0:
        return 1.0
    return min(1.0, abs(_autocorrelation(h, t, psi)) ** 2)


def hadamard_test_exact(h: HermitianMatrix, t: float, psi: StateVector) -> tuple:
    """Exact (Re, Im) of <psi| exp(-iHt) |psi> (the zero-shot-noise limit)."""
    _check_dims(h, psi)
    a = _autocorrelation(h, t, psi)
    return a.real, a.imag

def hadamard_test(h: HermitianMatrix, t: float, psi: StateVector, shots: int, seed: int) -> tuple:
    """Shot-noise estimates of (Re, Im) of <psi| exp(-iHt) |psi>.

    The ancilla measures 0 with probability (1 + Re)/2 (phase-shifted variant:
    (1 + Im)/2); counts are binomial draws around the exact values, so the
    estimates converge to the exact parts at the 1/sqrt(shots) rate.
    """
    if shots < 1:
        raise EmptyRequest(f"need shots >= 1, got {shots}")
    re, im = hadamard_test_exact(h, t, psi)
    rng = np.random.default_rng(seed)
    p_re = min(1.0, max(0.0, 0.5 * (1.0 + re)))
    p_im = min(1.0, max(0.0, 0.5 * (1.0 + im)))
    k_re = rng.binomial(shots, p_re)
    k_im = rng.binomial(shots, p_im)
    return 2.0 * k_re / shots - 1.0, 2.0 * k_im / shots - 1.0


def _phase_kernel(theta: np.ndarray, n_ancilla: int) -> np.ndarray:
    """Exact ancilla-register distribution of phase estimation.

    For eigenphase theta the register reads m with probability
    |sin(M pi delta) / (M sin(pi delta))|^2, delta = theta - m/M, M = 2^n.
    Rows: one eigenphase; columns: the M grid outcomes. Each row sums to 1.
    """
    m_grid = 1 << n_ancilla
    delta = theta[:, None] - np.arange(m_grid)[None, :] / m_grid
    num = np.sin(m_grid * math.pi * delta)
    den = m_grid * np.sin(math.pi * delta)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(np.abs(den) < 1e-300, 1.0, (num / den) ** 2)
    return p


def qpe(
    h: HermitianMatrix,
    t: float,
    psi: StateVector,
    n_ancilla: int,
    shots: int,
    seed: int,
) -> list:
    """Emulated quantum phase estimation on exp(-iHt).

    Eigenphases theta_k = (lambda_k t / 2pi) mod 1 feed the exact register
    distribution weighted by |<v_k|psi>|^2; shots are a multinomial draw from
    it. Returns the observed estimates sorted by probability (descending,
    ties by phase). Exactly representable eigenphases concentrate all mass on
    their grid point, so they are returned with probability 1 at any shots.
    """
    if not (1 <= n_ancilla <= _MAX_ANCILLA):
        raise Unsupported(f"n_ancilla must be in [1, {_MAX_ANCILLA}], got {n_ancilla}")
    if shots < 1:
        raise EmptyRequest(f"need shots >= 1, got {shots}")
    _check_dims(h, psi)
    w, c = _overlap_weights(h, psi)
    weights = np.abs(c) ** 2
    theta = np.mod(w * t / (2.0 * math.pi), 1.0)
    dist = weights @ _phase_kernel(theta, n_ancilla)
    dist = np.maximum(dist, 0.0)
    dist /= dist.sum()
    counts = np.random.default_rng(seed).multinomial(shots, dist)
    m_grid = 1 << n_ancilla
    observed = np.nonzero(counts)[0]
    estimates = [
        PhaseEstimate(phase=m / m_grid, probability=counts[m] / shots, n_ancilla=n_ancilla)
        for m in observed
    ]
    estimates.sort(key=lambda e: (-e.probability, e.phase))
    return estimates


def ipr(psi: StateVector) -> float:
    """Inverse participation ratio sum_i |amp_i|^4 (1/dim uniform, 1 basis state)."""
    a = np.abs(psi.amplitudes)
    return float(np.sum(a**4))
