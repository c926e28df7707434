"""Ring-route fleet spacing statistics, circular Dyson log-gas sampling,
chaos diagnostics, and stop-time schedule optimization."""

__version__ = "0.1.0"

from .ring_model import FleetSnapshot, RingRoute, SpacingSample, Stop, advance, spacings
from .spectral_statistics import (
    GOE,
    GSE,
    GUE,
    POISSON,
    EnsembleKind,
    Histogram,
    cdf,
    fit_brody,
    ks_distance,
    l1_histogram_distance,
    mean_r,
    pdf,
    r_reference,
    sample_spacings,
)
from .dyson_gas import (
    GasConfiguration,
    HamiltonianSpec,
    HermitianMatrix,
    InversePower,
    LogGas,
    Spectrum,
    build_hamiltonian,
    circular_log_gas_energy,
    circular_spacings,
    confined_log_gas_energy,
    eigenvalues,
    run_circular_gas,
    sample_circular_gas,
    unfold,
)
from .quantum_emulation import (
    PhaseEstimate,
    StateVector,
    evolve,
    hadamard_test,
    ipr,
    qpe,
    survival_probability,
)
from .optimizer import (
    DisplacementPlan,
    Objective,
    RRatio,
    Schedule,
    SpacingKS,
    SpectralKS,
    displacement_plan_matching,
    local_search_optimize,
    schedule_from_displacements,
    simulate_round,
    target_configuration,
)
from .ingestion import GpsRecord, RoutePolyline, map_match, parse_gps, serialize_gps, snapshot_at
