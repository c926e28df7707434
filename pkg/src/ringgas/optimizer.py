"""Drive fleet spacings toward a target ensemble via per-bus stop-time schedules.

A displacement plan assigns each bus a signed along-ring shift; the scheduler
converts shifts into dwell times at each bus's next stop (a shorter-than-mean
dwell advances the bus, a longer one holds it back), clamping to the stop's
envelope and deferring the unrealized remainder as carryover.
"""

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import spectral_statistics as stats
from .dyson_gas import HamiltonianSpec, build_hamiltonian, eigenvalues, sample_circular_gas, unfold
from .errors import ConfigError, DimensionMismatch, DomainError, EmptyRequest
from .ring_model import FleetSnapshot, RingRoute, advance, sorted_positions, spacings
from .spectral_statistics import EnsembleKind


@dataclass(frozen=True)
class SpacingKS:
    """Objective: KS distance of normalized fleet spacings from a reference ensemble."""

    target: EnsembleKind

    @property
    def label(self) -> str:
        return f"spacing_ks[{self.target.label}]"


@dataclass(frozen=True)
class RRatio:
    """Objective: |mean r of fleet spacings - target_r|."""

    target_r: float

    def __post_init__(self):
        if not (0.0 < self.target_r < 1.0):
            raise DomainError(f"target_r must lie in (0, 1), got {self.target_r}")

    @property
    def label(self) -> str:
        return f"r_ratio[{self.target_r:g}]"


@dataclass(frozen=True)
class SpectralKS:
    """Objective: KS distance of unfolded Hamiltonian spacings from a reference.

    Costs a full eigendecomposition per evaluation; prefer SpacingKS for
    fleets larger than ~100 buses.
    """

    spec: HamiltonianSpec
    target: EnsembleKind

    @property
    def label(self) -> str:
        return f"spectral_ks[{self.target.label}]"


@dataclass(frozen=True)
class Objective:
    variant: object
    epsilon: float = 0.0

    def __post_init__(self):
        if not isinstance(self.variant, (SpacingKS, RRatio, SpectralKS)):
            raise DomainError(f"unknown objective variant {type(self.variant).__name__}")
        if self.epsilon < 0:
            raise DomainError(f"epsilon must be >= 0, got {self.epsilon}")


@dataclass(frozen=True)
class DisplacementPlan:
    """Signed per-bus shifts in the bus order of the snapshot they were built for."""

    deltas: np.ndarray
    objective_before: float
    objective_after: float
    iterations_used: int
    clamped: bool = False

    def __post_init__(self):
        d = np.asarray(self.deltas, dtype=float)
        d.flags.writeable = False
        object.__setattr__(self, "deltas", d)
        if self.objective_after > self.objective_before:
            raise DomainError("plan must not worsen the objective")

    def to_dict(self) -> dict:
        return {
            "deltas_m": [float(d) for d in self.deltas],
            "objective_before": self.objective_before,
            "objective_after": self.objective_after,
            "iterations_used": self.iterations_used,
            "clamped": self.clamped,
        }


@dataclass(frozen=True)
class ScheduleEntry:
    bus_id: str
    stop_index: int
    stop_duration: float  # seconds
    carryover: float  # signed meters still owed after this stop


@dataclass(frozen=True)
class Schedule:
    entries: tuple

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))

    def to_dict(self, generated_at: float) -> dict:
        return {
            "generated_at": generated_at,
            "entries": [
                {
                    "bus_id": e.bus_id,
                    "stop_index": e.stop_index,
                    "stop_duration_s": e.stop_duration,
                    "carryover_m": e.carryover,
                }
                for e in self.entries
            ],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["bus_id", "stop_index", "stop_duration_s", "carryover_m"])
        for e in self.entries:
            writer.writerow([e.bus_id, e.stop_index, repr(e.stop_duration), repr(e.carryover)])
        return buf.getvalue()


def wrap_signed(delta, circumference: float):
    """Ring-shortest signed difference, wrapped into (-L/2, L/2]."""
    d = np.mod(np.asarray(delta, dtype=float), circumference)
    return np.where(d > circumference / 2.0, d - circumference, d)


def target_configuration(
    snapshot: FleetSnapshot,
    route: RingRoute,
    target: EnsembleKind,
    seed: int,
    sweeps: int = 2000,
) -> np.ndarray:
    """Sorted target positions realizing the requested spacing ensemble.

    Wigner-Dyson targets run the circular gas sampler at the matching beta;
    Poisson lays i.i.d. uniform positions; Brody draws spacings by inverse
    CDF, rescales them to close the ring, and lays them from the current
    first (lowest-position) bus.
    """
    n = snapshot.size
    length = route.circumference
    if n < 2:
        raise DomainError(f"need at least 2 buses, got {n}")
    if target.family == "wigner_dyson":
        config = sample_circular_gas(n, length, float(target.beta), sweeps, seed)
        return np.sort(config.positions)
    if target.family == "poisson":
        rng = np.random.default_rng(seed)
        return np.sort(rng.uniform(0.0, length, n))
    # brody: inverse-CDF spacings rescaled to sum to the circumference
    gaps = stats.sample_spacings(target, n, seed)
    gaps = gaps * (length / gaps.sum())
    start = sorted_positions(snapshot, length)[0]
    pos = np.mod(start + np.concatenate(([0.0], np.cumsum(gaps[:-1]))), length)
    return np.sort(pos)


def displacement_plan_matching(
    current: np.ndarray,
    target: np.ndarray,
    max_shift: float,
    circumference: float,
) -> DisplacementPlan:
    """Order-preserving cyclic assignment of buses to target slots.

    Evaluates all N rotations of the target against the current positions
    (both sorted), keeping cyclic order; picks the rotation with the smallest
    total |delta| under ring-shortest signed differences (ties to the smallest
    rotation index). Deltas are then clamped to +/- max_shift with the clamp
    flagged. objective_before is the cost of the index-aligned assignment.
    """
    cur = np.asarray(current, dtype=float)
    tgt = np.asarray(target, dtype=float)
    if cur.shape != tgt.shape or cur.ndim != 1:
        raise DimensionMismatch(f"position counts differ: {cur.shape} vs {tgt.shape}")
    if cur.size == 0:
        raise EmptyRequest("no positions to match")
    if max_shift <= 0:
        raise DomainError(f"max_shift must be positive, got {max_shift}")
    n = cur.size
    best_rot, best_cost, cost0 = 0, math.inf, 0.0
    for r in range(n):
        deltas = wrap_signed(np.roll(tgt, -r) - cur, circumference)
        cost = float(np.sum(np.abs(deltas)))
        if r == 0:
            cost0 = cost
        if cost < best_cost:
            best_rot, best_cost = r, cost
    deltas = wrap_signed(np.roll(tgt, -best_rot) - cur, circumference)
    clamped = bool(np.any(np.abs(deltas) > max_shift))
    deltas = np.clip(deltas, -max_shift, max_shift)
    return DisplacementPlan(
        deltas=deltas,
        objective_before=cost0,
        objective_after=best_cost,
        iterations_used=n,
        clamped=clamped,
    )


def match_snapshot_to_target(
    snapshot: FleetSnapshot,
    route: RingRoute,
    target: np.ndarray,
    max_shift: float,
) -> DisplacementPlan:
    """displacement_plan_matching with deltas permuted back to snapshot bus order."""
    pos = snapshot.positions
    order = sorted(range(snapshot.size), key=lambda k: (pos[k], snapshot.buses[k][0]))
    plan = displacement_plan_matching(pos[order], np.sort(target), max_shift, route.circumference)
    deltas = np.empty(snapshot.size)
    deltas[list(order)] = plan.deltas
    return DisplacementPlan(
        deltas=deltas,
        objective_before=plan.objective_before,
        objective_after=plan.objective_after,
        iterations_used=plan.iterations_used,
        clamped=plan.clamped,
    )


def evaluate_objective(variant, snapshot: FleetSnapshot, route: RingRoute) -> float:
    """Objective value of a snapshot (lower is better, 0 is a perfect match)."""
    if isinstance(variant, Objective):
        variant = variant.variant
    sample = spacings(snapshot, route)
    if isinstance(variant, SpacingKS):
        return stats.ks_distance(sample.normalized, variant.target)
    if isinstance(variant, RRatio):
        return abs(stats.mean_r(sample.raw) - variant.target_r)
    if isinstance(variant, SpectralKS):
        spectrum = eigenvalues(build_hamiltonian(snapshot, route, variant.spec))
        method = "polynomial" if spectrum.size >= 7 else "global_mean"
        unfolded = unfold(spectrum, method)
        return stats.ks_distance(unfolded.unfolded_spacings, variant.target)
    raise DomainError(f"unknown objective variant {type(variant).__name__}")


def local_search_optimize(
    snapshot: FleetSnapshot,
    route: RingRoute,
    objective: Objective,
    max_shift: float,
    iterations: int,
    temperature_schedule=None,
    seed: int = 0,
    step_size: float | None = None,
) -> DisplacementPlan:
    """Simulated annealing over per-bus displacements.

    Each proposal perturbs one randomly chosen delta by a uniform step and
    clips it to +/- max_shift; acceptance is Metropolis at temperature
    T_k = T_0 * 0.995^k with T_0 the initial objective value (or a caller
    supplied temperature_schedule(k)). The best visited plan is returned;
    the search stops early once the objective reaches objective.epsilon.
    """
    if max_shift <= 0:
        raise DomainError(f"max_shift must be positive, got {max_shift}")
    if iterations < 0:
        raise DomainError(f"iterations must be >= 0, got {iterations}")
    n = snapshot.size
    value0 = evaluate_objective(objective.variant, snapshot, route)
    if value0 <= objective.epsilon or iterations == 0:
        return DisplacementPlan(
            deltas=np.zeros(n),
            objective_before=value0,
            objective_after=value0,
            iterations_used=0,
        )

    rng = np.random.default_rng(seed)
    # default proposal width: a quarter of the allowed shift, floored at the
    # mean gap; pure mean-gap steps are too timid to unfold clustered fleets
    width = (
        step_size
        if step_size is not None
        else min(max(route.circumference / n, max_shift / 4.0), max_shift)
    )
    t0 = value0
    deltas = np.zeros(n)
    value = value0
    best_deltas, best_value = deltas.copy(), value0
    used = iterations
    for k in range(iterations):
        i = int(rng.integers(n))
        old = deltas[i]
        deltas[i] = float(np.clip(old + rng.uniform(-width, width), -max_shift, max_shift))
        candidate = evaluate_objective(objective.variant, advance(snapshot, route, deltas), route)
        temp = temperature_schedule(k) if temperature_schedule else t0 * 0.995**k
        diff = candidate - value
        if diff <= 0 or (temp > 0 and rng.random() < math.exp(-diff / temp)):
            value = candidate
            if value < best_value:
                best_value = value
                best_deltas = deltas.copy()
                if best_value <= objective.epsilon:
                    used = k + 1
                    break
        else:
            deltas[i] = old
    return DisplacementPlan(
        deltas=best_deltas,
        objective_before=value0,
        objective_after=best_value,
        iterations_used=used,
    )


def _next_stop_index(route: RingRoute, position: float) -> int:
    """First stop at or ahead of position in ring order (a stop underfoot counts)."""
    arcs = np.array([s.arc_position for s in route.stops])
    ahead = np.mod(arcs - position, route.circumference)
    return int(np.argmin(ahead))


def _dwell_for(delta: float, stop, velocity: float) -> tuple:
    """Dwell duration realizing a requested shift, and the signed carryover.

    t = mean_stop_time - delta/velocity, clamped into the stop envelope;
    carryover is whatever part of delta the clamp left unrealized, so that
    delta = realized + carryover exactly.
    """
    t = stop.mean_stop_time - delta / velocity
    duration = min(max(t, stop.min_stop_time), stop.max_stop_time)
    realized = (stop.mean_stop_time - duration) * velocity
    return duration, delta - realized


def schedule_from_displacements(
    plan: DisplacementPlan,
    snapshot: FleetSnapshot,
    route: RingRoute,
) -> Schedule:
    """Per-bus dwell time at each bus's next stop realizing the plan.

    A positive delta shortens the dwell below the mean stop time (the bus
    gains ground); a negative delta lengthens it. Durations are clamped into
    [min_stop_time, max_stop_time] and the unrealized remainder is recorded
    as carryover for the following stop.
    """
    if plan.deltas.shape != (snapshot.size,):
        raise DimensionMismatch(
            f"plan has {plan.deltas.size} deltas for {snapshot.size} buses"
        )
    if not route.stops:
        raise ConfigError("route has no stops to schedule")
    entries = []
    for (bus_id, position), delta in zip(snapshot.buses, plan.deltas):
        j = _next_stop_index(route, position)
        velocity = route.segment_velocities[(j - 1) % len(route.stops)]
        duration, carry = _dwell_for(float(delta), route.stops[j], velocity)
        entries.append(
            ScheduleEntry(bus_id=bus_id, stop_index=j, stop_duration=duration, carryover=carry)
        )
    return Schedule(entries=tuple(entries))


def simulate_round(
    snapshot: FleetSnapshot,
    route: RingRoute,
    schedule: Schedule,
    horizon: float,
) -> FleetSnapshot:
    """Kinematic forward simulation of the fleet over a fixed horizon.

    Buses cruise at the segment velocity, dwell per the schedule at their
    scheduled stop, dwell the mean stop time elsewhere, and keep applying any
    carryover at subsequent stops (re-clamped each time). Buses do not
    interact. Returns the fleet at snapshot.time + horizon.
    """
    if horizon < 0:
        raise DomainError(f"horizon must be >= 0, got {horizon}")
    if not route.stops:
        raise ConfigError("route has no stops (no segment velocities to cruise at)")
    by_bus = {}
    for e in schedule.entries:
        by_bus.setdefault(e.bus_id, {})[e.stop_index] = e

    length = route.circumference
    n_stops = len(route.stops)
    moved = []
    for bus_id, position in snapshot.buses:
        if not (0 <= position < length):
            raise DomainError(f"bus {bus_id} position {position} outside [0, circumference)")
        x = position
        remaining = horizon
        carry = None  # not yet past the scheduled stop
        skip_index = None  # stop just departed; do not dwell there again
        while remaining > 0:
            arcs = [s.arc_position for s in route.stops]
            ahead = [(a - x) % length for a in arcs]
            if skip_index is not None:
                ahead[skip_index] = length  # force strictly-ahead choice
            j = int(np.argmin(ahead))
            dist = ahead[j]
            velocity = route.segment_velocities[(j - 1) % n_stops]
            travel = dist / velocity
            if travel >= remaining:
                x = (x + velocity * remaining) % length
                remaining = 0.0
                break
            x = route.stops[j].arc_position
            remaining -= travel
            entry = by_bus.get(bus_id, {}).get(j)
            if entry is not None:
                duration, carry = entry.stop_duration, entry.carryover
            elif carry is not None:
                duration, carry = _dwell_for(carry, route.stops[j], velocity)
            else:
                duration = route.stops[j].mean_stop_time
            if duration >= remaining:
                remaining = 0.0
                break
            remaining -= duration
            skip_index = j
        moved.append((bus_id, x))
    return FleetSnapshot(time=snapshot.time + horizon, buses=tuple(moved))
