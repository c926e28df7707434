"""GPS trace ingestion: parsing, map matching onto a ring polyline, snapshots.

Coordinates are projected to a local plane with an equirectangular projection
about the polyline's centroid latitude; adequate for city-scale rings and
keeps every projection invertible and cheap.
"""

import csv
import io
import json
import logging
import math
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .errors import ConfigError, EmptySnapshot, InvalidPosition, IoError, ParseError
from .ring_model import FleetSnapshot

logger = logging.getLogger(__name__)

EARTH_RADIUS = 6371000.0  # meters
OFF_ROUTE_THRESHOLD = 100.0  # meters of cross-track error
DEFAULT_STALENESS = 300.0  # seconds

CSV_HEADER = ["timestamp_iso8601", "bus_id", "lat", "lon"]


@dataclass(frozen=True)
class GpsRecord:
    """One fix: epoch seconds, bus id, WGS84 degrees."""

    timestamp: float
    bus_id: str
    lat: float
    lon: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0):
            raise ParseError(f"latitude {self.lat} outside [-90, 90]")
        if not (-180.0 <= self.lon <= 180.0):
            raise ParseError(f"longitude {self.lon} outside [-180, 180]")
        if not self.bus_id:
            raise ParseError("bus_id must be non-empty")
        if not math.isfinite(self.timestamp):
            raise ParseError(f"non-finite timestamp {self.timestamp}")


@dataclass(frozen=True)
class RejectedRow:
    row: int
    reason: str


@dataclass(frozen=True)
class ParseResult:
    records: tuple
    rejected: tuple


def _parse_timestamp(text: str) -> float:
    try:
        dt = datetime.fromisoformat(text.strip().replace("Z", "+00:00"))
    except ValueError as exc:
        raise ParseError(f"bad ISO-8601 timestamp {text!r}") from exc
    if dt.tzinfo is None:
        raise ParseError(f"timestamp {text!r} lacks a UTC offset")
    return dt.timestamp()


def _format_timestamp(ts: float) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).isoformat()


def _decode(source) -> str:
    if isinstance(source, str):
        return source
    if isinstance(source, bytes):
        try:
            return source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise IoError(f"stream is not valid UTF-8: {exc}") from exc
    try:
        data = source.read()
    except OSError as exc:
        raise IoError(f"unreadable stream: {exc}") from exc
    return _decode(data)


def _rows_from_csv(text: str):
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise IoError("empty CSV stream") from None
    if [h.strip() for h in header] != CSV_HEADER:
        raise ParseError(f"bad CSV header {header!r}, expected {CSV_HEADER}")
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        yield line_no, row


def _rows_from_json(text: str):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise IoError(f"stream is not valid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise ParseError("JSON traces must be an array of fix objects")
    for index, obj in enumerate(data, start=1):
        if not isinstance(obj, dict):
            yield index, None
            continue
        yield index, [obj.get("t"), obj.get("id"), obj.get("lat"), obj.get("lon")]


def parse_gps(source, fmt: str = "csv", strict: bool = False) -> ParseResult:
    """Parse a GPS trace stream into records sorted by (timestamp, bus_id).

    CSV needs the exact header timestamp_iso8601,bus_id,lat,lon; JSON is an
    array of {"t", "id", "lat", "lon"} objects. Timestamps must carry a UTC
    offset. In lenient mode malformed rows are collected into the rejected
    report; in strict mode the first one raises ParseError with its row
    number. Duplicate (bus, timestamp) fixes keep the last one in the file.
    """
    text = _decode(source)
    if fmt == "csv":
        rows = _rows_from_csv(text)
    elif fmt == "json":
        rows = _rows_from_json(text)
    else:
        raise ConfigError(f"unknown trace format {fmt!r}")

    by_key = {}
    arrival = {}
    rejected = []
    count = 0
    for row_no, row in rows:
        try:
            if row is None or len(row) != 4 or any(v is None for v in row):
                raise ParseError("row must have timestamp, bus_id, lat, lon")
            ts = _parse_timestamp(str(row[0]))
            try:
                lat, lon = float(row[2]), float(row[3])
            except (TypeError, ValueError):
                raise ParseError(f"bad coordinates {row[2]!r}, {row[3]!r}") from None
            record = GpsRecord(timestamp=ts, bus_id=str(row[1]).strip(), lat=lat, lon=lon)
        except ParseError as exc:
            if strict:
                raise ParseError(f"row {row_no}: {exc}", row=row_no) from None
            rejected.append(RejectedRow(row=row_no, reason=str(exc)))
            continue
        key = (record.bus_id, record.timestamp)
        if key in by_key:
            logger.info("duplicate fix for bus %s at %s: last-in-file wins", *key)
        else:
            arrival[key] = count
            count += 1
        by_key[key] = record
    records = sorted(by_key.values(), key=lambda r: (r.timestamp, r.bus_id))
    return ParseResult(records=tuple(records), rejected=tuple(rejected))


def serialize_gps(records, fmt: str = "csv") -> str:
    """Inverse of parse_gps on valid record lists."""
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow([_format_timestamp(r.timestamp), r.bus_id, repr(r.lat), repr(r.lon)])
        return buf.getvalue()
    if fmt == "json":
        rows = [
            {"t": _format_timestamp(r.timestamp), "id": r.bus_id, "lat": r.lat, "lon": r.lon}
            for r in records
        ]
        return json.dumps(rows, indent=2) + "\n"
    raise ConfigError(f"unknown trace format {fmt!r}")


@dataclass(frozen=True)
class RoutePolyline:
    """Closed lat/lon polyline with cumulative arc lengths in a local plane."""

    vertices: tuple  # ((lat, lon), ...) with first == last
    xy: np.ndarray  # projected vertices, meters
    cumulative_arc: np.ndarray  # arc length at each vertex, cumulative_arc[0] = 0
    total_length: float

    @classmethod
    def from_vertices(cls, vertices) -> "RoutePolyline":
        verts = tuple((float(a), float(b)) for a, b in vertices)
        if len(verts) < 4:
            raise ConfigError(f"closed polyline needs >= 4 vertices, got {len(verts)}")
        if verts[0] != verts[-1]:
            raise ConfigError("polyline must be closed (first vertex == last vertex)")
        lat_ref = math.radians(sum(v[0] for v in verts[:-1]) / (len(verts) - 1))
        lats = np.radians([v[0] for v in verts])
        lons = np.radians([v[1] for v in verts])
        xy = np.column_stack([EARTH_RADIUS * lons * math.cos(lat_ref), EARTH_RADIUS * lats])
        seg_lengths = np.linalg.norm(np.diff(xy, axis=0), axis=1)
        if np.any(seg_lengths <= 0):
            raise ConfigError("polyline has zero-length segments")
        cum = np.concatenate([[0.0], np.cumsum(seg_lengths)])
        xy.flags.writeable = False
        cum.flags.writeable = False
        return cls(vertices=verts, xy=xy, cumulative_arc=cum, total_length=float(cum[-1]))

    @classmethod
    def from_dict(cls, obj: dict) -> "RoutePolyline":
        try:
            return cls.from_vertices(obj["vertices"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad polyline object: {exc}") from exc

    def _reference_latitude(self) -> float:
        return math.radians(sum(v[0] for v in self.vertices[:-1]) / (len(self.vertices) - 1))

    def project(self, lat: float, lon: float) -> np.ndarray:
        lat_ref = self._reference_latitude()
        return np.array(
            [EARTH_RADIUS * math.radians(lon) * math.cos(lat_ref), EARTH_RADIUS * math.radians(lat)]
        )

    def unproject(self, xy) -> tuple:
        """Inverse of project: local plane meters back to (lat, lon) degrees."""
        lat_ref = self._reference_latitude()
        return (
            math.degrees(float(xy[1]) / EARTH_RADIUS),
            math.degrees(float(xy[0]) / (EARTH_RADIUS * math.cos(lat_ref))),
        )

    def check_circumference(self, circumference: float, tolerance: float = 0.02):
        """Polyline length and route circumference must agree within 2%."""
        if abs(self.total_length - circumference) > tolerance * circumference:
            raise ConfigError(
                f"polyline length {self.total_length:.1f} m disagrees with route "
                f"circumference {circumference:.1f} m beyond {tolerance:.0%}"
            )


@dataclass(frozen=True)
class MatchResult:
    arc_position: float
    cross_track_error: float
    off_route: bool
    matched_lat: float
    matched_lon: float


def map_match(record: GpsRecord, polyline: RoutePolyline, threshold: float = OFF_ROUTE_THRESHOLD) -> MatchResult:
    """Project a fix onto its nearest polyline segment.

    Returns the cumulative arc position of the projection and the cross-track
    (perpendicular) distance; fixes farther than the threshold are flagged
    off-route. Ties go to the earliest segment, so a fix exactly on a shared
    vertex lands on that vertex's arc position.
    """
    p = polyline.project(record.lat, record.lon)
    a = polyline.xy[:-1]
    b = polyline.xy[1:]
    ab = b - a
    seg_len2 = np.sum(ab * ab, axis=1)
    u = np.clip(np.sum((p - a) * ab, axis=1) / seg_len2, 0.0, 1.0)
    closest = a + u[:, None] * ab
    dist = np.linalg.norm(p - closest, axis=1)
    k = int(np.argmin(dist))
    seg_lengths = np.sqrt(seg_len2)
    arc = float(polyline.cumulative_arc[k] + u[k] * seg_lengths[k])
    if arc >= polyline.total_length:
        arc -= polyline.total_length
    err = float(dist[k])
    m_lat, m_lon = polyline.unproject(closest[k])
    return MatchResult(
        arc_position=arc,
        cross_track_error=err,
        off_route=err > threshold,
        matched_lat=m_lat,
        matched_lon=m_lon,
    )


@dataclass(frozen=True)
class ExcludedBus:
    bus_id: str
    reason: str


@dataclass(frozen=True)
class SnapshotReport:
    snapshot: FleetSnapshot
    excluded: tuple


def snapshot_at(
    records,
    t: float,
    polyline: RoutePolyline,
    staleness: float = DEFAULT_STALENESS,
    threshold: float = OFF_ROUTE_THRESHOLD,
) -> SnapshotReport:
    """Fleet positions at time t from the latest usable fix per bus.

    A fix is usable when it is at or before t, within the staleness window,
    and map-matches on-route. Buses without a usable fix are excluded with a
    reason; an entirely empty snapshot raises EmptySnapshot. Positions are
    polyline arc meters.
    """
    if staleness <= 0:
        raise ConfigError(f"staleness must be positive, got {staleness}")
    latest = {}
    for r in records:
        if r.timestamp <= t and (latest.get(r.bus_id) is None or r.timestamp >= latest[r.bus_id].timestamp):
            latest[r.bus_id] = r
    all_ids = sorted({r.bus_id for r in records})
    buses = []
    excluded = []
    for bus_id in all_ids:
        r = latest.get(bus_id)
        if r is None or t - r.timestamp > staleness:
            excluded.append(ExcludedBus(bus_id=bus_id, reason="stale"))
            continue
        match = map_match(r, polyline, threshold)
        if match.off_route:
            excluded.append(ExcludedBus(bus_id=bus_id, reason="off_route"))
            continue
        buses.append((bus_id, match.arc_position))
    if not buses:
        raise EmptySnapshot(f"no bus has a usable fix at t={t}")
    return SnapshotReport(
        snapshot=FleetSnapshot(time=t, buses=tuple(buses)),
        excluded=tuple(excluded),
    )


def rescale_positions(snapshot: FleetSnapshot, polyline: RoutePolyline, circumference: float) -> FleetSnapshot:
    """Rescale polyline arc positions onto a route's circumference coordinate."""
    polyline.check_circumference(circumference)
    factor = circumference / polyline.total_length
    buses = tuple((b, min(p * factor, np.nextafter(circumference, 0.0))) for b, p in snapshot.buses)
    out = FleetSnapshot(time=snapshot.time, buses=buses)
    if np.any(out.positions < 0):
        raise InvalidPosition("negative arc position after rescaling")
    return out
