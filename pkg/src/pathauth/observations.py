"""Discrete observation vocabulary: (cluster label, time zone, day type) plus Null.

Symbol layout for a model with ``N`` known clusters::

    label order    Known 1..N, NearUnknown 1..N, FarUnknown, Transit
    symbol_id      label * 6 + timezone * 2 + daytype
    Null           6 * (2N + 2), the last id

so ``V = 6 * (2N + 2) + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from typing import NamedTuple

import numpy as np

from .clustering import ClusterModel, Kind, PointAssignment, assign_point
from .geo import Trace

TZ1, TZ2, TZ3 = 0, 1, 2
WD, WE = 0, 1
TIMEZONE_NAMES = ("TZ1", "TZ2", "TZ3")
DAYTYPE_NAMES = ("WD", "WE")

_EIGHT_H = 8 * 3600
_SIXTEEN_H = 16 * 3600


def timezone_of(ts: datetime) -> int:
    """TZ1 covers 00:00:00-08:00:00, TZ2 up to 16:00:00, TZ3 the rest of the day."""
    s = ts.hour * 3600 + ts.minute * 60 + ts.second + ts.microsecond / 1e6
    if s <= _EIGHT_H:
        return TZ1
    if s <= _SIXTEEN_H:
        return TZ2
    return TZ3


def daytype_of(ts: datetime | date) -> int:
    return WE if ts.weekday() >= 5 else WD


class Decomposition(NamedTuple):
    label: int
    timezone: int
    daytype: int


@dataclass(frozen=True)
class Vocabulary:
    """Observation symbols for a model with ``n_clusters`` known clusters.

    ``location``, ``timezone`` and ``daytype`` give each symbol's parts; the
    Null symbol has its own location code and ``-1`` for the time parts.
    ``Vocabulary.plain(V)`` builds an undecomposed alphabet of size V where
    every symbol behaves like Null.
    """

    n_clusters: int | None
    size: int
    location: np.ndarray = field(repr=False, compare=False)
    timezone: np.ndarray = field(repr=False, compare=False)
    daytype: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def for_clusters(cls, n_clusters: int) -> "Vocabulary":
        if n_clusters < 0:
            raise ValueError("n_clusters must be >= 0")
        n_labels = 2 * n_clusters + 2
        size = 6 * n_labels + 1
        ids = np.arange(size - 1)
        location = np.append(ids // 6, n_labels)
        timezone = np.append((ids % 6) // 2, -1)
        daytype = np.append(ids % 2, -1)
        return cls(n_clusters, size, location, timezone, daytype)

    @classmethod
    def plain(cls, size: int) -> "Vocabulary":
        if size < 1:
            raise ValueError("vocabulary size must be >= 1")
        return cls(None, size, np.arange(size), np.full(size, -1), np.full(size, -1))

    @property
    def null(self) -> int:
        return self.size - 1

    @property
    def decomposable(self) -> np.ndarray:
        return self.timezone >= 0

    def label_index(self, assignment: PointAssignment) -> int:
        n = self.n_clusters
        if assignment.kind == Kind.KNOWN:
            return assignment.cluster - 1
        if assignment.kind == Kind.NEAR_UNKNOWN:
            return n + assignment.cluster - 1
        if assignment.kind == Kind.FAR_UNKNOWN:
            return 2 * n
        return 2 * n + 1

    def encode(self, assignment: PointAssignment) -> int:
        ts = assignment.point.timestamp
        return self.label_index(assignment) * 6 + timezone_of(ts) * 2 + daytype_of(ts)

    def decode(self, symbol_id: int) -> Decomposition | None:
        if not 0 <= symbol_id < self.size:
            raise ValueError(f"symbol {symbol_id} out of vocabulary of size {self.size}")
        if self.timezone[symbol_id] < 0:
            return None
        return Decomposition(
            int(self.location[symbol_id]), int(self.timezone[symbol_id]), int(self.daytype[symbol_id])
        )

    def compose(self, label: int, timezone: int, daytype: int) -> int:
        return label * 6 + timezone * 2 + daytype

    def describe(self, symbol_id: int) -> str:
        parts = self.decode(symbol_id)
        if parts is None:
            return "Null" if self.n_clusters is not None else str(symbol_id)
        n = self.n_clusters
        if parts.label < n:
            loc = f"C{parts.label + 1}"
        elif parts.label < 2 * n:
            loc = f"Unk{parts.label - n + 1}"
        elif parts.label == 2 * n:
            loc = "UnkInf"
        else:
            loc = "Tr"
        return f"{loc}-{TIMEZONE_NAMES[parts.timezone]}-{DAYTYPE_NAMES[parts.daytype]}"


def encode(assignment: PointAssignment, n_clusters: int) -> int:
    return Vocabulary.for_clusters(n_clusters).encode(assignment)


@dataclass
class ObservationSequence:
    user_id: str
    symbols: np.ndarray
    timestamps: list[datetime]

    def __post_init__(self):
        self.symbols = np.asarray(self.symbols, dtype=np.int64).reshape(-1)
        if len(self.symbols) != len(self.timestamps):
            raise ValueError("symbols and timestamps differ in length")

    def __len__(self) -> int:
        return len(self.symbols)

    def __getitem__(self, item: slice) -> "ObservationSequence":
        if not isinstance(item, slice):
            raise TypeError("ObservationSequence supports slicing only")
        return ObservationSequence(self.user_id, self.symbols[item], self.timestamps[item])

    def take(self, indices) -> "ObservationSequence":
        indices = list(indices)
        return ObservationSequence(
            self.user_id, self.symbols[indices], [self.timestamps[i] for i in indices]
        )


def build_sequence(trace: Trace, model: ClusterModel) -> ObservationSequence:
    """Encode a resampled trace and close every calendar day with a Null.

    The transit test only compares consecutive fixes of the same session.
    Null is stamped one second after the day's last observation.
    """
    vocab = Vocabulary.for_clusters(model.n_clusters)
    symbols: list[int] = []
    stamps: list[datetime] = []
    last: datetime | None = None
    for session in trace.iter_sessions():
        prev = None
        for point in session:
            if last is not None and point.timestamp.date() != last.date():
                symbols.append(vocab.null)
                stamps.append(last + timedelta(seconds=1))
            symbols.append(vocab.encode(assign_point(model, prev, point)))
            stamps.append(point.timestamp)
            last = point.timestamp
            prev = point
    if stamps:
        symbols.append(vocab.null)
        stamps.append(stamps[-1] + timedelta(seconds=1))
    return ObservationSequence(trace.user_id, np.array(symbols, dtype=np.int64), stamps)
