"""Geodesic primitives and temporal resampling of raw location traces."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Iterator, Sequence

import numpy as np

EARTH_RADIUS_M = 6_371_000.0


@dataclass(frozen=True)
class GeoPoint:
    """One time-stamped latitude/longitude fix (degrees, local civil time)."""

    lat: float
    lon: float
    timestamp: datetime

    def __post_init__(self):
        # numpy scalars would leak into repr-based serialization
        object.__setattr__(self, "lat", float(self.lat))
        object.__setattr__(self, "lon", float(self.lon))
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")


@dataclass
class Trace:
    """Time-ordered fixes of one user.

    ``sessions`` holds half-open ``(start, stop)`` index ranges into
    ``points``. ``None`` means the whole trace is a single session.
    """

    user_id: str
    points: list[GeoPoint] = field(default_factory=list)
    sessions: list[tuple[int, int]] | None = None

    def __post_init__(self):
        for a, b in zip(self.points, self.points[1:]):
            if b.timestamp < a.timestamp:
                raise ValueError(f"trace {self.user_id!r} is not sorted by timestamp")

    def __len__(self) -> int:
        return len(self.points)

    def __getitem__(self, item: slice) -> "Trace":
        if not isinstance(item, slice):
            raise TypeError("Trace supports slicing only; use .points for single fixes")
        start, stop, step = item.indices(len(self.points))
        if step != 1:
            raise ValueError("Trace slices must be contiguous")
        return self.take(range(start, stop))

    @property
    def timestamps(self) -> list[datetime]:
        return [p.timestamp for p in self.points]

    def session_ranges(self) -> list[tuple[int, int]]:
        if self.sessions is None:
            return [(0, len(self.points))] if self.points else []
        return list(self.sessions)

    def iter_sessions(self) -> Iterator[list[GeoPoint]]:
        for start, stop in self.session_ranges():
            yield self.points[start:stop]

    def take(self, indices) -> "Trace":
        """Sub-trace of the given increasing indices, with session ranges re-cut."""
        indices = list(indices)
        keep = set(indices)
        new_points = [self.points[i] for i in indices]
        if self.sessions is None:
            sessions = None
        else:
            remap = {old: new for new, old in enumerate(indices)}
            sessions = []
            for start, stop in self.sessions:
                members = [remap[i] for i in range(start, stop) if i in keep]
                if members:
                    sessions.append((members[0], members[-1] + 1))
        return Trace(self.user_id, new_points, sessions)


def haversine_m(lat1, lon1, lat2, lon2):
    """Great-circle distance in meters; broadcasts over numpy arrays."""
    phi1 = np.radians(lat1)
    phi2 = np.radians(lat2)
    dphi = phi2 - phi1
    dlmb = np.radians(np.asarray(lon2) - np.asarray(lon1))
    h = np.sin(dphi / 2.0) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlmb / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def geodist(a: GeoPoint, b: GeoPoint) -> float:
    """Haversine distance between two fixes, in meters."""
    if a.lat == b.lat and a.lon == b.lon:
        return 0.0
    return float(haversine_m(a.lat, a.lon, b.lat, b.lon))


def speed(a: GeoPoint, b: GeoPoint) -> float:
    """Ground speed in m/s between two fixes, independent of argument order."""
    dt = abs((b.timestamp - a.timestamp).total_seconds())
    if dt == 0:
        raise ValueError("zero time delta")
    return geodist(a, b) / dt


def _resample_run(run: Sequence[GeoPoint], step: timedelta) -> list[GeoPoint]:
    # Emit the last fix at or before each tick t0, t0+step, ... up to the final fix.
    out = []
    tick = run[0].timestamp
    end = run[-1].timestamp
    i = 0
    while tick <= end:
        while i + 1 < len(run) and run[i + 1].timestamp <= tick:
            i += 1
        p = run[i]
        out.append(GeoPoint(p.lat, p.lon, tick))
        tick += step
    return out


def resample(trace: Trace, interval: float = 180.0, max_gap: float = 3600.0) -> Trace:
    """Resample each session of ``trace`` onto a fixed tick grid.

    Within a session the last known fix is repeated every ``interval``
    seconds. A gap between raw fixes longer than ``max_gap`` seconds splits
    the session, and the grid restarts at the first fix after the gap.
    Every contiguous run becomes one session of the output trace.
    """
    if interval <= 0:
        raise ValueError("interval must be positive")
    step = timedelta(seconds=interval)
    points: list[GeoPoint] = []
    sessions: list[tuple[int, int]] = []
    for session in trace.iter_sessions():
        if not session:
            continue
        run = [session[0]]
        runs = []
        for prev, cur in zip(session, session[1:]):
            if (cur.timestamp - prev.timestamp).total_seconds() > max_gap:
                runs.append(run)
                run = []
            run.append(cur)
        runs.append(run)
        for run in runs:
            chunk = _resample_run(run, step)
            if points and chunk[0].timestamp <= points[-1].timestamp:
                # overlapping sessions: drop ticks that would break ordering
                chunk = [p for p in chunk if p.timestamp > points[-1].timestamp]
                if not chunk:
                    continue
            sessions.append((len(points), len(points) + len(chunk)))
            points.extend(chunk)
    return Trace(trace.user_id, points, sessions)


def destination(lat: float, lon: float, north_m: float, east_m: float) -> tuple[float, float]:
    """Offset a coordinate by small metric displacements (local tangent plane)."""
    dlat = math.degrees(north_m / EARTH_RADIUS_M)
    dlon = math.degrees(east_m / (EARTH_RADIUS_M * math.cos(math.radians(lat))))
    return lat + dlat, lon + dlon
