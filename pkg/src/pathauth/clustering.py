"""Per-user location clusters, transit detection and unknown-cluster assignment."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from sklearn.cluster import DBSCAN

from .geo import EARTH_RADIUS_M, GeoPoint, haversine_m, speed

DEFAULT_UNKNOWN_RADIUS_M = 10_000.0
DEFAULT_TRANSIT_SPEED = 2.0
DEFAULT_MIN_PTS = 4

# Floor for eps halving during radius-constrained re-splitting.
_MIN_EPS_M = 1e-3


@dataclass(frozen=True)
class LocationCluster:
    id: int
    lat: float
    lon: float
    radius: float
    size: int = 0


@dataclass(frozen=True)
class ClusterModel:
    user_id: str
    clusters: tuple[LocationCluster, ...]
    r_max: float
    unknown_radius: float = DEFAULT_UNKNOWN_RADIUS_M
    transit_speed: float = DEFAULT_TRANSIT_SPEED
    _centers: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ids = [c.id for c in self.clusters]
        if ids != list(range(1, len(ids) + 1)):
            raise ValueError("cluster ids must be dense 1..N in order")
        centers = np.array([[c.lat, c.lon] for c in self.clusters], dtype=float).reshape(-1, 2)
        object.__setattr__(self, "_centers", centers)

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    @property
    def n_labels(self) -> int:
        return 2 * len(self.clusters) + 2

    def distances(self, point: GeoPoint) -> np.ndarray:
        return haversine_m(point.lat, point.lon, self._centers[:, 0], self._centers[:, 1])


class Kind(enum.IntEnum):
    KNOWN = 0
    NEAR_UNKNOWN = 1
    FAR_UNKNOWN = 2
    TRANSIT = 3


@dataclass(frozen=True)
class PointAssignment:
    kind: Kind
    cluster: int | None
    point: GeoPoint


def _dbscan_labels(coords: np.ndarray, weights: np.ndarray, eps_m: float, min_pts: int) -> np.ndarray:
    db = DBSCAN(
        eps=eps_m / EARTH_RADIUS_M,
        min_samples=min_pts,
        metric="haversine",
        algorithm="ball_tree",
    )
    return db.fit_predict(np.radians(coords), sample_weight=weights)


def _summarize(coords: np.ndarray, weights: np.ndarray) -> tuple[float, float, float]:
    lat, lon = np.average(coords, axis=0, weights=weights)
    radius = float(np.max(haversine_m(lat, lon, coords[:, 0], coords[:, 1])))
    return float(lat), float(lon), radius


def _bisect(coords: np.ndarray) -> np.ndarray:
    """Boolean mask splitting members around their two most distant extremes."""
    lat, lon = coords.mean(axis=0)
    a = coords[np.argmax(haversine_m(lat, lon, coords[:, 0], coords[:, 1]))]
    da = haversine_m(a[0], a[1], coords[:, 0], coords[:, 1])
    b = coords[np.argmax(da)]
    db = haversine_m(b[0], b[1], coords[:, 0], coords[:, 1])
    return da <= db


def _split(coords, weights, eps_m, r_max, min_pts, out):
    labels = _dbscan_labels(coords, weights, eps_m, min_pts)
    for label in range(labels.max() + 1):
        mask = labels == label
        c, w = coords[mask], weights[mask]
        lat, lon, radius = _summarize(c, w)
        if radius <= r_max:
            out.append((lat, lon, radius, int(w.sum())))
            continue
        before = len(out)
        if eps_m / 2.0 >= _MIN_EPS_M:
            _split(c, w, eps_m / 2.0, r_max, min_pts, out)
        if len(out) == before and len(c) > 1:
            # Uniformly dense stretches dissolve at any smaller eps; cut them
            # in two and retry each half at the current eps instead.
            half = _bisect(c)
            if half.all() or not half.any():
                continue
            for part in (half, ~half):
                _split(c[part], w[part], eps_m, r_max, min_pts, out)


def build_clusters(
    points: Sequence[GeoPoint], r_max: float, min_pts: int = DEFAULT_MIN_PTS
) -> list[LocationCluster]:
    """DBSCAN the fixes into location clusters whose radius never exceeds ``r_max``.

    Clustering starts at ``eps = r_max / 2``; any cluster whose radius
    (max member distance to its centroid) exceeds ``r_max`` is re-clustered
    with half the eps until the bound holds; a cluster that dissolves
    entirely into noise at the smaller eps is bisected instead. Clusters are
    numbered from 1 by decreasing size.
    """
    if not points:
        raise ValueError("no training points")
    if r_max <= 0:
        raise ValueError("r_max must be positive")
    if min_pts < 1:
        raise ValueError("min_pts must be >= 1")
    raw = np.array([[p.lat, p.lon] for p in points], dtype=float)
    # Stationary resampling repeats fixes; collapse duplicates into weights.
    coords, counts = np.unique(raw, axis=0, return_counts=True)
    found: list[tuple[float, float, float, int]] = []
    _split(coords, counts.astype(float), r_max / 2.0, r_max, min_pts, found)
    found.sort(key=lambda c: (-c[3], c[0], c[1]))
    return [
        LocationCluster(id=i, lat=lat, lon=lon, radius=radius, size=size)
        for i, (lat, lon, radius, size) in enumerate(found, start=1)
    ]


def build_cluster_model(
    user_id: str,
    points: Sequence[GeoPoint],
    r_max: float,
    min_pts: int = DEFAULT_MIN_PTS,
    unknown_radius: float = DEFAULT_UNKNOWN_RADIUS_M,
    transit_speed: float = DEFAULT_TRANSIT_SPEED,
) -> ClusterModel:
    clusters = build_clusters(points, r_max, min_pts)
    return ClusterModel(user_id, tuple(clusters), r_max, unknown_radius, transit_speed)


def assign_point(model: ClusterModel, prev: GeoPoint | None, point: GeoPoint) -> PointAssignment:
    """Label one fix as Transit, Known(j), NearUnknown(j) or FarUnknown.

    Transit wins whenever the speed from ``prev`` reaches the model's transit
    speed. Otherwise the nearest cluster decides: inside its radius is Known,
    within the unknown-search radius is NearUnknown, else FarUnknown. Ties go
    to the lowest cluster id.
    """
    if prev is not None and prev.timestamp != point.timestamp:
        if speed(prev, point) >= model.transit_speed:
            return PointAssignment(Kind.TRANSIT, None, point)
    if model.n_clusters == 0:
        return PointAssignment(Kind.FAR_UNKNOWN, None, point)
    d = model.distances(point)
    j = int(np.argmin(d))
    cluster = model.clusters[j]
    if d[j] <= cluster.radius:
        return PointAssignment(Kind.KNOWN, cluster.id, point)
    if d[j] <= model.unknown_radius:
        return PointAssignment(Kind.NEAR_UNKNOWN, cluster.id, point)
    return PointAssignment(Kind.FAR_UNKNOWN, None, point)
