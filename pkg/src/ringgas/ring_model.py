"""Fleet geometry on a closed ring route: stops, snapshots, spacings."""

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    DimensionMismatch,
    InsufficientFleet,
    InvalidPosition,
)


@dataclass(frozen=True)
class Stop:
    """A stop on the ring with its dwell-time envelope (seconds)."""

    arc_position: float
    mean_stop_time: float
    max_stop_time: float
    min_stop_time: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.arc_position) or self.arc_position < 0:
            raise ConfigError(f"stop arc_position must be finite and >= 0, got {self.arc_position}")
        if not (0.0 <= self.min_stop_time <= self.mean_stop_time <= self.max_stop_time):
            raise ConfigError(
                "stop times must satisfy 0 <= min <= mean <= max, got "
                f"min={self.min_stop_time} mean={self.mean_stop_time} max={self.max_stop_time}"
            )


@dataclass(frozen=True)
class RingRoute:
    """Closed route of given circumference with ordered stops.

    segment_velocities[k] is the mean cruising speed (m/s) on the segment
    from stops[k] to stops[(k+1) % S], one entry per stop, cyclically.
    """

    circumference: float
    stops: tuple = ()
    segment_velocities: tuple = ()

    def __post_init__(self):
        if not np.isfinite(self.circumference) or self.circumference <= 0:
            raise ConfigError(f"circumference must be positive, got {self.circumference}")
        object.__setattr__(self, "stops", tuple(self.stops))
        object.__setattr__(self, "segment_velocities", tuple(float(v) for v in self.segment_velocities))
        arcs = [s.arc_position for s in self.stops]
        if any(a >= self.circumference for a in arcs):
            raise ConfigError("stop arc positions must lie in [0, circumference)")
        if any(b <= a for a, b in zip(arcs, arcs[1:])):
            raise ConfigError("stop arc positions must be strictly increasing")
        if self.stops and len(self.segment_velocities) != len(self.stops):
            raise ConfigError(
                f"need one segment velocity per stop, got {len(self.segment_velocities)} "
                f"for {len(self.stops)} stops"
            )
        if any(not np.isfinite(v) or v <= 0 for v in self.segment_velocities):
            raise ConfigError("all segment velocities must be positive and finite")

    def segment_velocity(self, stop_index: int) -> float:
        """Speed on the segment leaving stops[stop_index]."""
        return self.segment_velocities[stop_index % len(self.stops)]

    def to_dict(self) -> dict:
        return {
            "circumference_m": self.circumference,
            "stops": [
                {
                    "arc_position_m": s.arc_position,
                    "mean_stop_time_s": s.mean_stop_time,
                    "max_stop_time_s": s.max_stop_time,
                    "min_stop_time_s": s.min_stop_time,
                }
                for s in self.stops
            ],
            "segment_velocities_mps": list(self.segment_velocities),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "RingRoute":
        try:
            stops = tuple(
                Stop(
                    arc_position=float(s["arc_position_m"]),
                    mean_stop_time=float(s["mean_stop_time_s"]),
                    max_stop_time=float(s["max_stop_time_s"]),
                    min_stop_time=float(s.get("min_stop_time_s", 0.0)),
                )
                for s in obj.get("stops", ())
            )
            return cls(
                circumference=float(obj["circumference_m"]),
                stops=stops,
                segment_velocities=tuple(float(v) for v in obj.get("segment_velocities_mps", ())),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad route object: {exc}") from exc


@dataclass(frozen=True)
class FleetSnapshot:
    """Positions of every bus at one instant. buses is ((bus_id, position_m), ...)."""

    time: float
    buses: tuple

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple((str(b), float(p)) for b, p in self.buses))
        ids = [b for b, _ in self.buses]
        if len(set(ids)) != len(ids):
            raise ConfigError("bus ids must be unique")
        for b, p in self.buses:
            if not np.isfinite(p):
                raise InvalidPosition(f"bus {b} has non-finite position {p}")

    @property
    def size(self) -> int:
        return len(self.buses)

    @property
    def positions(self) -> np.ndarray:
        return np.array([p for _, p in self.buses], dtype=float)

    @property
    def ids(self) -> tuple:
        return tuple(b for b, _ in self.buses)

    def to_dict(self) -> dict:
        return {
            "time": self.time,
            "buses": [{"id": b, "position_m": p} for b, p in self.buses],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "FleetSnapshot":
        try:
            return cls(
                time=float(obj["time"]),
                buses=tuple((str(b["id"]), float(b["position_m"])) for b in obj["buses"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad snapshot object: {exc}") from exc


@dataclass(frozen=True)
class SpacingSample:
    """Ring gaps between consecutive buses, raw (meters) and normalized to unit mean."""

    raw: np.ndarray
    normalized: np.ndarray
    mean_spacing: float

    def __post_init__(self):
        raw = np.asarray(self.raw, dtype=float)
        normalized = np.asarray(self.normalized, dtype=float)
        raw.flags.writeable = False
        normalized.flags.writeable = False
        object.__setattr__(self, "raw", raw)
        object.__setattr__(self, "normalized", normalized)
        if raw.shape != normalized.shape:
            raise DimensionMismatch("raw and normalized spacings differ in length")
        if np.any(raw < 0):
            raise InvalidPosition("spacings must be non-negative")
        total = self.mean_spacing * raw.size
        if abs(raw.sum() - total) > 1e-9 * max(total, 1.0):
            raise InvalidPosition("raw spacings must sum to the circumference")


def sorted_positions(snapshot: FleetSnapshot, circumference: float) -> np.ndarray:
    """Positions sorted ascending; exact ties broken by bus_id for a stable order."""
    pos = snapshot.positions
    if np.any(pos < 0) or np.any(pos >= circumference):
        raise InvalidPosition("all positions must lie in [0, circumference)")
    order = sorted(range(snapshot.size), key=lambda k: (pos[k], snapshot.buses[k][0]))
    return pos[order]


def spacings(snapshot: FleetSnapshot, route: RingRoute) -> SpacingSample:
    """Cyclic gaps between consecutive buses, in ring order.

    raw[i] = x_{i+1} - x_i for sorted positions, with the last gap wrapping
    around the ring; normalized gaps divide by the mean spacing
    circumference / N so their mean is exactly 1.
    """
    n = snapshot.size
    if n < 2:
        raise InsufficientFleet(f"need at least 2 buses for spacings, got {n}")
    x = sorted_positions(snapshot, route.circumference)
    raw = np.empty(n)
    raw[:-1] = np.diff(x)
    raw[-1] = route.circumference - x[-1] + x[0]
    mean_spacing = route.circumference / n
    return SpacingSample(raw=raw, normalized=raw / mean_spacing, mean_spacing=mean_spacing)


def advance(snapshot: FleetSnapshot, route: RingRoute, displacements) -> FleetSnapshot:
    """Move each bus by its signed displacement, wrapping modulo the circumference.

    Bus order and ids are preserved; displacements follow snapshot.buses order.
    """
    disp = np.asarray(displacements, dtype=float)
    if disp.shape != (snapshot.size,):
        raise DimensionMismatch(
            f"need one displacement per bus, got {disp.shape} for {snapshot.size} buses"
        )
    pos = snapshot.positions
    if np.any(pos < 0) or np.any(pos >= route.circumference):
        raise InvalidPosition("all positions must lie in [0, circumference)")
    moved = np.mod(pos + disp, route.circumference)
    buses = tuple((b, float(p)) for (b, _), p in zip(snapshot.buses, moved))
    return FleetSnapshot(time=snapshot.time, buses=buses)
