import numpy as np
import pytest

from ringgas.errors import (
    ConfigError,
    DimensionMismatch,
    InsufficientFleet,
    InvalidPosition,
)
from ringgas.ring_model import FleetSnapshot, RingRoute, Stop, advance, spacings


def snapshot(positions, time=0.0):
    return FleetSnapshot(time=time, buses=tuple((f"b{i}", p) for i, p in enumerate(positions)))


RING = RingRoute(circumference=27000.0)


class TestRoute:
    def test_stop_envelope_validated(self):
        with pytest.raises(ConfigError):
            Stop(arc_position=0.0, mean_stop_time=60.0, max_stop_time=30.0)
        with pytest.raises(ConfigError):
            Stop(arc_position=0.0, mean_stop_time=10.0, max_stop_time=30.0, min_stop_time=20.0)

    def test_stops_strictly_increasing(self):
        stops = (
            Stop(arc_position=100.0, mean_stop_time=30.0, max_stop_time=60.0),
            Stop(arc_position=100.0, mean_stop_time=30.0, max_stop_time=60.0),
        )
        with pytest.raises(ConfigError):
            RingRoute(circumference=1000.0, stops=stops, segment_velocities=(10.0, 10.0))

    def test_velocity_per_stop(self):
        stops = (Stop(arc_position=0.0, mean_stop_time=30.0, max_stop_time=60.0),)
        with pytest.raises(ConfigError):
            RingRoute(circumference=1000.0, stops=stops, segment_velocities=())
        with pytest.raises(ConfigError):
            RingRoute(circumference=1000.0, stops=stops, segment_velocities=(-5.0,))

    def test_round_trip_dict(self):
        stops = (
            Stop(arc_position=0.0, mean_stop_time=30.0, max_stop_time=60.0, min_stop_time=5.0),
            Stop(arc_position=400.0, mean_stop_time=20.0, max_stop_time=90.0),
        )
        route = RingRoute(circumference=1000.0, stops=stops, segment_velocities=(10.0, 8.0))
        assert RingRoute.from_dict(route.to_dict()) == route


class TestSpacings:
    def test_three_buses_hand_derived(self):
        # sorted positions {2000, 10000, 26000} on a 27 km ring
        sample = spacings(snapshot([26000.0, 2000.0, 10000.0]), RING)
        assert np.allclose(sample.raw, [8000.0, 16000.0, 3000.0])
        assert sample.mean_spacing == 9000.0
        assert np.allclose(sample.normalized, [8 / 9, 16 / 9, 1 / 3])

    def test_spacings_sum_to_circumference(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            n = int(rng.integers(2, 40))
            sample = spacings(snapshot(rng.uniform(0, 27000.0, n)), RING)
            assert np.isclose(sample.raw.sum(), 27000.0, rtol=1e-12)
            assert np.isclose(sample.normalized.mean(), 1.0, rtol=1e-12)

    def test_equally_spaced_normalized_unity(self):
        sample = spacings(snapshot(np.arange(10) * 2700.0), RING)
        assert np.allclose(sample.normalized, 1.0)

    def test_coincident_positions_give_zero_spacing(self):
        sample = spacings(snapshot([5000.0, 5000.0, 10000.0]), RING)
        assert sorted(sample.raw) == [0.0, 5000.0, 22000.0]

    def test_tie_order_stable_by_bus_id(self):
        snap = FleetSnapshot(time=0.0, buses=(("z", 5000.0), ("a", 5000.0), ("m", 9000.0)))
        first = spacings(snap, RING)
        second = spacings(
            FleetSnapshot(time=0.0, buses=(("a", 5000.0), ("m", 9000.0), ("z", 5000.0))), RING
        )
        assert np.array_equal(first.raw, second.raw)

    def test_single_bus_rejected(self):
        with pytest.raises(InsufficientFleet):
            spacings(snapshot([100.0]), RING)

    def test_position_out_of_range_rejected(self):
        with pytest.raises(InvalidPosition):
            spacings(snapshot([0.0, 27000.0]), RING)

    def test_scale_invariance_of_normalized(self):
        rng = np.random.default_rng(9)
        pos = rng.uniform(0, 27000.0, 12)
        base = spacings(snapshot(pos), RING)
        for c in (0.25, 3.0, 1337.5):
            scaled = spacings(snapshot(pos * c), RingRoute(circumference=27000.0 * c))
            assert np.allclose(scaled.normalized, base.normalized, rtol=1e-12, atol=1e-12)


class TestAdvance:
    def test_wraps_modulo_circumference(self):
        snap = advance(snapshot([26900.0]), RING, [200.0])
        assert snap.buses[0][1] == 100.0

    def test_negative_displacement_wraps(self):
        snap = advance(snapshot([50.0]), RING, [-100.0])
        assert snap.buses[0][1] == 26950.0

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatch):
            advance(snapshot([0.0, 1.0]), RING, [1.0])

    def test_order_preserved_for_small_displacements(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            pos = np.sort(rng.uniform(0, 27000.0, 8))
            gaps = np.diff(np.concatenate([pos, [pos[0] + 27000.0]]))
            limit = gaps.min() / 2
            if limit <= 0:
                continue
            disp = rng.uniform(-limit * 0.99, limit * 0.99, 8)
            moved = advance(snapshot(pos), RING, disp)
            x = moved.positions
            rolled = np.mod(x - x[0], 27000.0)
            assert np.all(np.diff(rolled) > 0)

    def test_ids_preserved(self):
        snap = snapshot([10.0, 20.0])
        moved = advance(snap, RING, [5.0, 5.0])
        assert moved.ids == snap.ids

    def test_duplicate_bus_ids_rejected(self):
        with pytest.raises(ConfigError):
            FleetSnapshot(time=0.0, buses=(("a", 1.0), ("a", 2.0)))
