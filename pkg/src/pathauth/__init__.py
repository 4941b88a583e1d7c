"""User verification from historical location traces."""

from .clustering import ClusterModel, LocationCluster, assign_point, build_clusters
from .geo import GeoPoint, Trace, geodist, resample, speed
from .observations import ObservationSequence, Vocabulary, build_sequence

__version__ = "0.1.0"

__all__ = [
    "ClusterModel",
    "GeoPoint",
    "LocationCluster",
    "ObservationSequence",
    "Trace",
    "Vocabulary",
    "assign_point",
    "build_clusters",
    "build_sequence",
    "geodist",
    "resample",
    "speed",
]
