import math
from datetime import datetime, timedelta

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathauth.geo import GeoPoint, Trace, geodist, resample, speed

R = 6_371_000.0
T0 = datetime(2016, 3, 9, 10, 0, 0)


def sphere_distance(lat1, lon1, lat2, lon2):
    """Vincenty formula on a sphere; algebraically independent of haversine."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dl = math.radians(lon2 - lon1)
    num = math.hypot(math.cos(p2) * math.sin(dl), math.cos(p1) * math.sin(p2) - math.sin(p1) * math.cos(p2) * math.cos(dl))
    den = math.sin(p1) * math.sin(p2) + math.cos(p1) * math.cos(p2) * math.cos(dl)
    return R * math.atan2(num, den)


def pt(lat, lon, seconds=0):
    return GeoPoint(lat, lon, T0 + timedelta(seconds=seconds))


coords = st.tuples(st.floats(-89.9, 89.9), st.floats(-179.9, 179.9))


def test_identity_distance_is_zero():
    assert geodist(pt(38.98, -76.93), pt(38.98, -76.93)) == 0.0


def test_one_degree_on_equator():
    expected = sphere_distance(0, 0, 0, 1)
    assert expected == pytest.approx(111_195, abs=1)
    assert geodist(pt(0, 0), pt(0, 1)) == pytest.approx(expected, abs=1e-6)


def test_half_circumference():
    assert geodist(pt(0, 0), pt(0, 180)) == pytest.approx(math.pi * R, abs=10)


@given(coords, coords)
def test_symmetry_and_oracle(a, b):
    pa, pb = pt(*a), pt(*b)
    assert geodist(pa, pb) == geodist(pb, pa)
    assert geodist(pa, pb) == pytest.approx(sphere_distance(*a, *b), abs=1e-3, rel=1e-9)


@settings(max_examples=200)
@given(coords, coords, coords)
def test_triangle_inequality(a, b, c):
    pa, pb, pc = pt(*a), pt(*b), pt(*c)
    assert geodist(pa, pc) <= (geodist(pa, pb) + geodist(pb, pc)) * (1 + 1e-6) + 1e-6


def test_geopoint_bounds():
    with pytest.raises(ValueError, match="latitude"):
        GeoPoint(91.0, 0.0, T0)
    with pytest.raises(ValueError, match="longitude"):
        GeoPoint(0.0, 181.0, T0)


class TestSpeed:
    def test_stationary(self):
        assert speed(pt(1, 1), pt(1, 1, 180)) == 0.0

    def test_arithmetic(self):
        a = pt(0, 0)
        # due north by 360 m
        b = GeoPoint(math.degrees(360 / R), 0.0, T0 + timedelta(seconds=180))
        assert speed(a, b) == pytest.approx(2.0, rel=1e-9)

    def test_one_degree_per_hour(self):
        assert speed(pt(0, 0), pt(0, 1, 3600)) == pytest.approx(sphere_distance(0, 0, 0, 1) / 3600)
        assert speed(pt(0, 0), pt(0, 1, 3600)) == pytest.approx(30.9, abs=0.05)

    def test_zero_delta(self):
        with pytest.raises(ValueError, match="zero time delta"):
            speed(pt(0, 0), pt(0, 1))

    def test_order_invariant(self):
        a, b = pt(10, 10), pt(10.01, 10.02, 500)
        assert speed(a, b) == speed(b, a)


class TestResample:
    def test_empty(self):
        assert resample(Trace("u", [])).points == []

    def test_single_point(self):
        out = resample(Trace("u", [pt(1, 2)]))
        assert out.points == [pt(1, 2)]

    def test_stationary_ten_minutes(self):
        raw = Trace("u", [pt(1, 2, 0), pt(1, 2, 600)])
        out = resample(raw)
        assert [p.timestamp for p in out.points] == [T0 + timedelta(seconds=s) for s in (0, 180, 360, 540)]
        assert all((p.lat, p.lon) == (1, 2) for p in out.points)

    def test_repeats_last_known_fix(self):
        raw = Trace("u", [pt(1, 2, 0), pt(1.001, 2, 200), pt(1.002, 2, 400)])
        out = resample(raw)
        assert [(p.lat, (p.timestamp - T0).seconds) for p in out.points] == [(1, 0), (1, 180), (1.001, 360)]

    def test_long_gap_not_filled(self):
        raw = Trace("u", [pt(1, 2, 0), pt(1, 2, 360), pt(3, 4, 360 + 7200), pt(3, 4, 360 + 7200 + 200)])
        out = resample(raw)
        stamps = [(p.timestamp - T0).total_seconds() for p in out.points]
        assert stamps == [0, 180, 360, 7560, 7740]
        assert out.sessions == [(0, 3), (3, 5)]

    def test_sessions_resampled_independently(self):
        raw = Trace("u", [pt(1, 2, 0), pt(1, 2, 300), pt(5, 5, 400), pt(5, 5, 500)], sessions=[(0, 2), (2, 4)])
        out = resample(raw)
        stamps = [(p.timestamp - T0).total_seconds() for p in out.points]
        assert stamps == [0, 180, 400]
        assert out.sessions == [(0, 2), (2, 3)]

    @given(st.lists(st.integers(0, 5000), min_size=1, max_size=30))
    def test_uniform_spacing_within_run(self, offsets):
        offsets = sorted(offsets)
        raw = Trace("u", [pt(1, 1, s) for s in offsets])
        out = resample(raw, interval=180, max_gap=10_000)
        stamps = out.timestamps
        assert all((b - a).total_seconds() == 180 for a, b in zip(stamps, stamps[1:]))
        assert stamps[0] == raw.points[0].timestamp


def test_trace_rejects_unsorted():
    with pytest.raises(ValueError, match="not sorted"):
        Trace("u", [pt(0, 0, 10), pt(0, 0, 0)])


def test_trace_slicing_recuts_sessions():
    t = Trace("u", [pt(0, 0, s) for s in range(6)], sessions=[(0, 2), (2, 6)])
    assert t[1:4].sessions == [(0, 1), (1, 3)]
    assert len(t[1:4]) == 3
