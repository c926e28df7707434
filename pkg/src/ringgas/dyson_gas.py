"""Dyson log-gas energies, a circular Metropolis sampler, and fleet Hamiltonians.

The circular gas at inverse temperature beta targets the density
proportional to exp(-beta * V) with V = -sum_{i<j} log d(x_i, x_j); with the
chord metric d = (L/pi) |sin(pi (x_i - x_j) / L)| this is exactly the joint
eigenangle density of the circular beta-ensemble (CUE at beta = 2).
"""

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numba import njit

from .errors import (
    ClampedDistanceWarning,
    DimensionMismatch,
    DomainError,
    InsufficientData,
    InsufficientFleet,
    NotHermitian,
    SingularConfiguration,
    Unsupported,
)
from .ring_model import FleetSnapshot, RingRoute, sorted_positions

DISTANCE_FLOOR = 0.1  # meters; pairwise separations are clamped here, never below


@dataclass(frozen=True)
class GasConfiguration:
    """Particle positions on a line (circumference None) or a ring of length L."""

    positions: np.ndarray
    circumference: float | None = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 1 or pos.size == 0:
            raise DomainError("positions must be a non-empty 1-D array")
        if not np.all(np.isfinite(pos)):
            raise DomainError("positions must be finite")
        if self.circumference is not None:
            if self.circumference <= 0:
                raise DomainError(f"circumference must be positive, got {self.circumference}")
            if np.any(pos < 0) or np.any(pos >= self.circumference):
                raise DomainError("ring positions must lie in [0, circumference)")
        if np.unique(pos).size != pos.size:
            raise SingularConfiguration("coincident positions are not allowed")
        pos.flags.writeable = False
        object.__setattr__(self, "positions", pos)

    @property
    def size(self) -> int:
        return self.positions.size

    @property
    def is_circular(self) -> bool:
        return self.circumference is not None


def chord_distance(delta, circumference: float):
    """Chord metric (L/pi) |sin(pi delta / L)| for signed ring separations."""
    return (circumference / math.pi) * np.abs(np.sin(math.pi * np.asarray(delta) / circumference))


def arc_distance(delta, circumference: float):
    """Shorter-way arc metric min(|delta|, L - |delta|)."""
    d = np.abs(np.asarray(delta, dtype=float)) % circumference
    return np.minimum(d, circumference - d)


def ring_distance(delta, circumference: float, mode: str = "chord"):
    if mode == "chord":
        return chord_distance(delta, circumference)
    if mode == "arc":
        return arc_distance(delta, circumference)
    raise Unsupported(f"unknown distance mode {mode!r}")


def confined_log_gas_energy(config: GasConfiguration) -> float:
    """V = -sum_{i<j} log|x_i - x_j| + (1/2) sum_i x_i^2 on the line."""
    if config.is_circular:
        raise DomainError("confined energy is defined for line configurations")
    x = config.positions
    i, j = np.triu_indices(x.size, k=1)
    return float(-np.sum(np.log(np.abs(x[i] - x[j]))) + 0.5 * np.sum(x * x))


def circular_log_gas_energy(config: GasConfiguration, distance_mode: str = "chord") -> float:
    """V = -sum_{i<j} log d(x_i, x_j) on the ring."""
    if not config.is_circular:
        raise DomainError("circular energy needs a ring configuration")
    x = config.positions
    i, j = np.triu_indices(x.size, k=1)
    d = ring_distance(x[i] - x[j], config.circumference, distance_mode)
    if np.any(d == 0.0):
        raise SingularConfiguration("coincident positions under the ring metric")
    return float(-np.sum(np.log(d)))


def circular_spacings(config: GasConfiguration) -> np.ndarray:
    """Cyclic gaps of a ring configuration, in sorted order (sum = circumference)."""
    if not config.is_circular:
        raise DomainError("spacings need a ring configuration")
    x = np.sort(config.positions)
    gaps = np.empty(x.size)
    gaps[:-1] = np.diff(x)
    gaps[-1] = config.circumference - x[-1] + x[0]
    return gaps


@njit(cache=True)
def _metropolis_steps(x, circumference, beta, step, offsets, accept_u, use_arc):
    """Single-particle Metropolis proposals, cycling particles 0..n-1.

    offsets and accept_u hold one pre-drawn uniform each per proposal, so the
    kernel is a pure function of its inputs. Returns the number of accepted
    proposals; x is updated in place.
    """
    n = x.shape[0]
    pi = math.pi
    accepted = 0
    for k in range(offsets.shape[0]):
        i = k % n
        xi = x[i]
        prop = (xi + step * (2.0 * offsets[k] - 1.0)) % circumference
        dlog = 0.0
        valid = True
        for j in range(n):
            if j == i:
                continue
            if use_arc:
                dn = abs(prop - x[j])
                if dn > circumference - dn:
                    dn = circumference - dn
                do = abs(xi - x[j])
                if do > circumference - do:
                    do = circumference - do
            else:
                dn = abs(math.sin(pi * (prop - x[j]) / circumference))
                do = abs(math.sin(pi * (xi - x[j]) / circumference))
            if dn <= 0.0:
                valid = False
                break
            dlog += math.log(dn) - math.log(do)
        if valid:
            a = beta * dlog
            if a >= 0.0 or accept_u[k] < math.exp(a):
                x[i] = prop
                accepted += 1
    return accepted


@dataclass(frozen=True)
class ChainStats:
    """Per-chain sampler diagnostics."""

    step_size: float
    acceptance_rate: float  # measured after burn-in
    sweeps: int
    burn_in_sweeps: int


@dataclass(frozen=True)
class GasRun:
    configurations: tuple
    stats: tuple


def _run_chain(n, circumference, beta, sweeps, seed_seq, distance_mode) -> tuple:
    rng = np.random.default_rng(seed_seq)
    # equally spaced start: the gas keeps its rigidity, so local spacing
    # statistics equilibrate within far fewer sweeps than from a random start
    x = (np.arange(n) + 0.5) * (circumference / n)
    use_arc = distance_mode == "arc"
    burn = int(round(0.2 * sweeps))
    step = circumference / n

    # burn-in: retune the step every few sweeps toward acceptance 0.5 +/- 0.1
    window = 16
    done = 0
    while done < burn:
        w = min(window, burn - done)
        m = w * n
        acc = _metropolis_steps(x, circumference, beta, step, rng.random(m), rng.random(m), use_arc)
        rate = acc / m
        if rate > 0.6:
            step = min(step * 1.3, circumference / 2.0)
        elif rate < 0.4:
            step = max(step / 1.3, 1e-9 * circumference)
        done += w

    prod = sweeps - burn
    rate = math.nan
    if prod > 0:
        m = prod * n
        acc = _metropolis_steps(x, circumference, beta, step, rng.random(m), rng.random(m), use_arc)
        rate = acc / m
    stats = ChainStats(step_size=step, acceptance_rate=rate, sweeps=sweeps, burn_in_sweeps=burn)
    return np.mod(x, circumference), stats


def run_circular_gas(
    n: int,
    circumference: float,
    beta: float,
    sweeps: int,
    seed: int,
    chains: int = 1,
    distance_mode: str = "chord",
) -> GasRun:
    """Run independent Metropolis chains; chain k draws from SeedSequence(seed, spawn_key=(k,))."""
    if n < 2:
        raise DomainError(f"need n >= 2 particles, got {n}")
    if sweeps < 1:
        raise DomainError(f"need sweeps >= 1, got {sweeps}")
    if chains < 1:
        raise DomainError(f"need chains >= 1, got {chains}")
    if beta < 0:
        raise DomainError(f"beta must be >= 0, got {beta}")
    if distance_mode not in ("chord", "arc"):
        raise Unsupported(f"unknown distance mode {distance_mode!r}")
    configs = []
    stats = []
    for k in range(chains):
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(k,))
        x, st = _run_chain(n, circumference, beta, sweeps, ss, distance_mode)
        configs.append(GasConfiguration(positions=x, circumference=circumference))
        stats.append(st)
    return GasRun(configurations=tuple(configs), stats=tuple(stats))


def sample_circular_gas(
    n: int,
    circumference: float,
    beta: float,
    sweeps: int,
    seed: int,
    distance_mode: str = "chord",
) -> GasConfiguration:
    """Final configuration of a single seeded chain (chain 0 of run_circular_gas)."""
    return run_circular_gas(n, circumference, beta, sweeps, seed, 1, distance_mode).configurations[0]


@dataclass(frozen=True)
class InversePower:
    """Pair kernel V(d) = d^-exponent."""

    exponent: float = 2.0

    def __post_init__(self):
        if self.exponent <= 0:
            raise DomainError(f"exponent must be positive, got {self.exponent}")

    def __call__(self, d):
        return np.asarray(d, dtype=float) ** -self.exponent

    @property
    def label(self) -> str:
        return f"inverse_power_{self.exponent:g}"


@dataclass(frozen=True)
class LogGas:
    """Pair kernel V(d) = -log d."""

    def __call__(self, d):
        return -np.log(np.asarray(d, dtype=float))

    @property
    def label(self) -> str:
        return "log_gas"


@dataclass(frozen=True)
class HamiltonianSpec:
    """Physical inputs of the fleet Hamiltonian.

    masses, velocities and lengths may each be a scalar (shared by all buses)
    or a per-bus sequence aligned with the snapshot's bus order. coupling
    scales every off-diagonal entry; neighbor_only keeps only ring-adjacent
    pairs (in sorted-position order) coupled.
    """

    potential: object = field(default_factory=InversePower)
    masses: object = 1.0
    velocities: object = 0.0
    lengths: object = 0.0
    coupling: float = 1.0
    distance_mode: str = "chord"
    neighbor_only: bool = False

    def __post_init__(self):
        if self.distance_mode not in ("chord", "arc"):
            raise Unsupported(f"unknown distance mode {self.distance_mode!r}")

    def to_dict(self) -> dict:
        def enc(v):
            return list(np.asarray(v, dtype=float)) if np.ndim(v) else float(v)

        return {
            "potential": self.potential.label,
            "masses": enc(self.masses),
            "velocities": enc(self.velocities),
            "lengths": enc(self.lengths),
            "coupling": self.coupling,
            "distance_mode": self.distance_mode,
            "neighbor_only": self.neighbor_only,
        }


def _per_bus(value, n: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise DimensionMismatch(f"{name} must be scalar or length {n}, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class HermitianMatrix:
    """Dense Hermitian matrix with a cached eigendecomposition."""

    entries: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.entries)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise DomainError(f"entries must be a square matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m.real)) or (np.iscomplexobj(m) and not np.all(np.isfinite(m.imag))):
            raise DomainError("matrix entries must be finite")
        scale = max(1.0, float(np.max(np.abs(m))))
        if np.max(np.abs(m - m.conj().T)) > 1e-12 * scale:
            raise NotHermitian("matrix is not conjugate-symmetric within 1e-12")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "entries", m)

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]

    @cached_property
    def eigensystem(self) -> tuple:
        """(eigenvalues ascending, eigenvector columns)."""
        w, v = np.linalg.eigh(self.entries)
        w.flags.writeable = False
        v.flags.writeable = False
        return w, v


@dataclass(frozen=True)
class Spectrum:
    """Sorted eigenvalues with optional unfolded spacings (unit mean)."""

    eigenvalues: np.ndarray
    unfolded_spacings: np.ndarray | None = None

    def __post_init__(self):
        w = np.asarray(self.eigenvalues, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise DomainError("eigenvalues must be a non-empty 1-D array")
        if np.any(np.diff(w) < 0):
            raise DomainError("eigenvalues must be sorted ascending")
        w = w.copy()
        w.flags.writeable = False
        object.__setattr__(self, "eigenvalues", w)
        if self.unfolded_spacings is not None:
            s = np.asarray(self.unfolded_spacings, dtype=float)
            if np.any(s < 0):
                raise DomainError("unfolded spacings must be non-negative")
            if abs(s.mean() - 1.0) > 1e-6:
                raise DomainError("unfolded spacings must have mean 1 within 1e-6")
            s = s.copy()
            s.flags.writeable = False
            object.__setattr__(self, "unfolded_spacings", s)

    @property
    def size(self) -> int:
        return self.eigenvalues.size


def build_hamiltonian(snapshot: FleetSnapshot, route: RingRoute, spec: HamiltonianSpec) -> HermitianMatrix:
    """Real symmetric fleet Hamiltonian.

    Diagonal entries are kinetic, m_i v_i^2 / 2. Off-diagonal entries are
    coupling * V(d_eff) where d_eff = max(d_ij - (l_i + l_j)/2, floor): the
    ring separation reduced by the buses' half lengths, clamped at
    DISTANCE_FLOOR (a warning is issued when the clamp engages).
    """
    n = snapshot.size
    if n < 2:
        raise InsufficientFleet(f"need at least 2 buses, got {n}")
    pos = snapshot.positions
    if np.any(pos < 0) or np.any(pos >= route.circumference):
        raise DomainError("all positions must lie in [0, circumference)")
    masses = _per_bus(spec.masses, n, "masses")
    velocities = _per_bus(spec.velocities, n, "velocities")
    lengths = _per_bus(spec.lengths, n, "lengths")

    mat = np.zeros((n, n))
    np.fill_diagonal(mat, 0.5 * masses * velocities**2)

    iu, ju = np.triu_indices(n, k=1)
    d = ring_distance(pos[iu] - pos[ju], route.circumference, spec.distance_mode)
    d_eff = d - 0.5 * (lengths[iu] + lengths[ju])
    clamped = d_eff < DISTANCE_FLOOR
    if np.any(clamped):
        warnings.warn(
            f"{int(clamped.sum())} pairwise distances clamped at {DISTANCE_FLOOR} m",
            ClampedDistanceWarning,
        )
        d_eff = np.maximum(d_eff, DISTANCE_FLOOR)
    off = spec.coupling * spec.potential(d_eff)

    if spec.neighbor_only:
        # ring adjacency in sorted-position order, including the wrap pair
        order = np.argsort(pos, kind="stable")
        adj = np.zeros((n, n), dtype=bool)
        for k in range(n):
            a, b = order[k], order[(k + 1) % n]
            adj[a, b] = adj[b, a] = True
        keep = adj[iu, ju]
        off = np.where(keep, off, 0.0)

    mat[iu, ju] = off
    mat[ju, iu] = off
    return HermitianMatrix(entries=mat)


def eigenvalues(matrix) -> Spectrum:
    """Sorted eigenvalues of a Hermitian matrix (ndarray input is validated)."""
    if not isinstance(matrix, HermitianMatrix):
        matrix = HermitianMatrix(entries=np.asarray(matrix))
    w, _ = matrix.eigensystem
    return Spectrum(eigenvalues=w)


def unfold(spectrum: Spectrum, method: str = "global_mean", degree: int = 5) -> Spectrum:
    """Attach unit-mean unfolded spacings to a spectrum.

    global_mean divides raw spacings by their mean. polynomial fits a degree-d
    polynomial to the spectral staircase N(lambda) by least squares, maps the
    eigenvalues through it (sorting the mapped values, which a non-monotone
    fit may require), and renormalizes the mapped spacings to mean 1.
    """
    w = spectrum.eigenvalues
    if w.size < 2:
        raise InsufficientData(f"unfolding needs >= 2 eigenvalues, got {w.size}")
    if method == "global_mean":
        s = np.diff(w)
    elif method == "polynomial":
        if degree < 1:
            raise DomainError(f"polynomial degree must be >= 1, got {degree}")
        if w.size < degree + 2:
            raise InsufficientData(
                f"polynomial({degree}) unfolding needs >= {degree + 2} eigenvalues, got {w.size}"
            )
        staircase = np.arange(1, w.size + 1, dtype=float)
        coeffs = np.polynomial.polynomial.polyfit(w, staircase, degree)
        mapped = np.sort(np.polynomial.polynomial.polyval(w, coeffs))
        s = np.diff(mapped)
    else:
        raise Unsupported(f"unknown unfolding method {method!r}")
    mean = s.mean()
    if mean <= 0:
        raise InsufficientData("degenerate spectrum: zero mean spacing")
    return Spectrum(eigenvalues=w, unfolded_spacings=s / mean)
