"""Trace parsers and writers, observation-sequence export and model files."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .clustering import ClusterModel, LocationCluster
from .geo import GeoPoint, Trace
from .observations import ObservationSequence
from .verifiers.hmm import HMMModel
from .verifiers.mc import MCModel
from .verifiers.sm import SMModel

PLT_HEADER_LINES = 6
PLT_HEADER = (
    "Geolife trajectory\n"
    "WGS 84\n"
    "Altitude is in Feet\n"
    "Reserved 3\n"
    "0,2,255,My Track,0,0,2,8421376\n"
    "0\n"
)
_SERIAL_EPOCH = datetime(1899, 12, 30)

MODEL_MAGIC = "trace-auth-model"
MODEL_VERSION = "v1"
MODEL_KINDS = ("clusters", "sm", "mc", "hmm")


class TraceFormatError(ValueError):
    pass


class ModelFormatError(ValueError):
    pass


def _point(lat: float, lon: float, ts: datetime, where: str) -> GeoPoint:
    if not -90.0 <= lat <= 90.0:
        raise TraceFormatError(f"{where}: latitude out of range ({lat})")
    if not -180.0 <= lon <= 180.0:
        raise TraceFormatError(f"{where}: longitude out of range ({lon})")
    return GeoPoint(lat, lon, ts)


def parse_plt_lines(lines, user_id: str = "", source: str = "<plt>") -> Trace:
    """Parse GeoLife PLT content (6 header lines, then one fix per line).

    Record fields: latitude, longitude, flag, altitude, serial date, date,
    time. Only latitude, longitude, date and time are kept.
    """
    points = []
    for lineno, raw in enumerate(lines, start=1):
        if lineno <= PLT_HEADER_LINES:
            continue
        line = raw.strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        fields = line.split(",")
        if len(fields) != 7:
            raise TraceFormatError(f"{where}: expected 7 fields, got {len(fields)}")
        try:
            lat, lon = float(fields[0]), float(fields[1])
            ts = datetime.strptime(f"{fields[5].strip()} {fields[6].strip()}", "%Y-%m-%d %H:%M:%S")
        except ValueError as exc:
            raise TraceFormatError(f"{where}: {exc}") from None
        points.append(_point(lat, lon, ts, where))
    try:
        return Trace(user_id, points)
    except ValueError as exc:
        raise TraceFormatError(f"{source}: {exc}") from None


def parse_plt(path, user_id: str | None = None) -> Trace:
    path = Path(path)
    if user_id is None:
        # GeoLife layout: Data/<user>/Trajectory/<file>.plt
        user_id = path.parent.parent.name if path.parent.name == "Trajectory" else path.stem
    with open(path, encoding="utf-8", newline=None) as fh:
        return parse_plt_lines(fh, user_id, str(path))


def format_plt(trace: Trace) -> str:
    out = [PLT_HEADER]
    for p in trace.points:
        serial = (p.timestamp - _SERIAL_EPOCH) / timedelta(days=1)
        out.append(
            f"{p.lat!r},{p.lon!r},0,0,{serial!r},"
            f"{p.timestamp:%Y-%m-%d},{p.timestamp:%H:%M:%S}\n"
        )
    return "".join(out)


def write_plt(trace: Trace, path) -> None:
    Path(path).write_text(format_plt(trace), encoding="utf-8")


def read_geolife_user(user_dir, user_id: str | None = None) -> Trace:
    """All PLT files of one GeoLife user merged; each file becomes a session."""
    user_dir = Path(user_dir)
    files = sorted((user_dir / "Trajectory").glob("*.plt")) or sorted(user_dir.glob("*.plt"))
    user_id = user_id or user_dir.name
    parts = [parse_plt(f, user_id) for f in files]
    parts = sorted((p for p in parts if p.points), key=lambda t: t.points[0].timestamp)
    points, sessions = [], []
    for part in parts:
        if points and part.points[0].timestamp < points[-1].timestamp:
            # overlapping logger files: keep only the later fixes
            part = Trace(user_id, [p for p in part.points if p.timestamp >= points[-1].timestamp])
            if not part.points:
                continue
        sessions.append((len(points), len(points) + len(part.points)))
        points.extend(part.points)
    return Trace(user_id, points, sessions)


@dataclass(frozen=True)
class CsvColumns:
    """Column names of a trace CSV; ``user`` and ``session`` may be absent."""

    lat: str = "lat"
    lon: str = "lon"
    timestamp: str = "timestamp"
    user: str | None = "user"
    session: str | None = "session"


def parse_csv(path, columns: CsvColumns = CsvColumns(), user_id: str | None = None) -> Trace:
    """Read a single-user trace CSV with ISO-8601 timestamps.

    Consecutive rows sharing a session id form one session. Without a
    session column the trace is a single session; without a user column the
    user id falls back to ``user_id`` or the file stem.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for name in (columns.lat, columns.lon, columns.timestamp):
            if name not in header:
                raise KeyError(f"{path}: missing column {name!r}")
        has_user = columns.user is not None and columns.user in header
        has_session = columns.session is not None and columns.session in header
        points, session_ids, users = [], [], set()
        for lineno, row in enumerate(reader, start=2):
            where = f"{path}:{lineno}"
            try:
                lat, lon = float(row[columns.lat]), float(row[columns.lon])
                ts = datetime.fromisoformat(row[columns.timestamp])
            except (TypeError, ValueError) as exc:
                raise TraceFormatError(f"{where}: {exc}") from None
            points.append(_point(lat, lon, ts, where))
            if has_user:
                users.add(row[columns.user])
            if has_session:
                session_ids.append(row[columns.session])
    if len(users) > 1:
        raise TraceFormatError(f"{path}: multiple users in one trace file")
    if users:
        user_id = users.pop()
    elif user_id is None:
        user_id = path.stem
    sessions = None
    if has_session and points:
        sessions, start = [], 0
        for i in range(1, len(points) + 1):
            if i == len(points) or session_ids[i] != session_ids[i - 1]:
                sessions.append((start, i))
                start = i
    try:
        return Trace(user_id, points, sessions)
    except ValueError as exc:
        raise TraceFormatError(f"{path}: {exc}") from None


def format_csv(trace: Trace) -> str:
    lines = ["user,session,lat,lon,timestamp"]
    for s, (start, stop) in enumerate(trace.session_ranges()):
        for p in trace.points[start:stop]:
            lines.append(f"{trace.user_id},{s},{p.lat!r},{p.lon!r},{p.timestamp.isoformat()}")
    return "\n".join(lines) + "\n"


def write_csv(trace: Trace, path) -> None:
    Path(path).write_text(format_csv(trace), encoding="utf-8")


@dataclass
class CorpusManifest:
    """Users of a corpus directory with their files and format tags."""

    users: list[dict] = field(default_factory=list)
    provenance: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        ids = [u["user_id"] for u in self.users]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate user ids in manifest")


def write_manifest(manifest: CorpusManifest, path) -> None:
    Path(path).write_text(json.dumps(asdict(manifest), indent=1, sort_keys=True) + "\n", encoding="utf-8")


def read_manifest(path) -> CorpusManifest:
    return CorpusManifest(**json.loads(Path(path).read_text(encoding="utf-8")))


def load_corpus(root, fmt: str = "auto") -> dict[str, Trace]:
    """Load every user trace under ``root``.

    ``csv``: one ``*.csv`` per user. ``geolife``: ``root`` (or ``root/Data``)
    holds one directory per user with PLT files. ``auto`` picks by content.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"corpus directory not found: {root}")
    if fmt == "auto":
        fmt = "csv" if any(root.glob("*.csv")) else "geolife"
    if fmt == "csv":
        traces = [parse_csv(f) for f in sorted(root.glob("*.csv"))]
    elif fmt == "geolife":
        base = root / "Data" if (root / "Data").is_dir() else root
        traces = [read_geolife_user(d) for d in sorted(base.iterdir()) if d.is_dir()]
    else:
        raise ValueError(f"unknown corpus format {fmt!r}")
    corpus = {}
    for t in traces:
        if t.user_id in corpus:
            raise ValueError(f"duplicate user id {t.user_id!r}")
        corpus[t.user_id] = t
    if not corpus:
        raise ValueError(f"no traces found under {root}")
    return corpus


def format_sequence(seq: ObservationSequence) -> str:
    return "".join(f"{ts.isoformat()},{int(s)}\n" for ts, s in zip(seq.timestamps, seq.symbols))


def write_sequence(seq: ObservationSequence, path) -> None:
    Path(path).write_text(format_sequence(seq), encoding="utf-8")


def read_sequence(path, user_id: str | None = None) -> ObservationSequence:
    path = Path(path)
    stamps, symbols = [], []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            ts, sym = line.rsplit(",", 1)
            stamps.append(datetime.fromisoformat(ts))
            symbols.append(int(sym))
        except ValueError as exc:
            raise TraceFormatError(f"{path}:{lineno}: {exc}") from None
    return ObservationSequence(user_id or path.stem, np.array(symbols, dtype=np.int64), stamps)


# -- model files -------------------------------------------------------------
#
# Line 1: "trace-auth-model v1 <kind>"; the rest is one JSON document.
# Python's float repr is the shortest string that round-trips exactly, so
# matrices reload bit-identically.


def _clusters_to_dict(model: ClusterModel) -> dict:
    return {
        "user_id": model.user_id,
        "r_max": model.r_max,
        "unknown_radius": model.unknown_radius,
        "transit_speed": model.transit_speed,
        "clusters": [[c.id, c.lat, c.lon, c.radius, c.size] for c in model.clusters],
    }


def _clusters_from_dict(d: dict) -> ClusterModel:
    clusters = tuple(LocationCluster(int(i), lat, lon, radius, int(size)) for i, lat, lon, radius, size in d["clusters"])
    return ClusterModel(d["user_id"], clusters, d["r_max"], d["unknown_radius"], d["transit_speed"])


def _verifier_kind(model) -> str:
    if isinstance(model, SMModel):
        return "sm"
    if isinstance(model, MCModel):
        return "mc"
    if isinstance(model, HMMModel):
        return "hmm"
    raise TypeError(f"cannot serialize {type(model).__name__}")


def _verifier_to_dict(model) -> dict:
    if isinstance(model, SMModel):
        return {"training_symbols": model.training_symbols.tolist()}
    if isinstance(model, MCModel):
        return {"delta": model.delta, "prior": model.prior.tolist(), "transitions": model.transitions.tolist()}
    return {
        "mode": model.mode,
        "delta": model.delta,
        "pi": model.pi.tolist(),
        "A": model.A.tolist(),
        "B": model.B.tolist(),
        "history": list(model.history),
    }


def _verifier_from_dict(kind: str, d: dict):
    if kind == "sm":
        return SMModel(np.array(d["training_symbols"], dtype=np.int64))
    if kind == "mc":
        return MCModel(np.array(d["prior"], dtype=float), np.array(d["transitions"], dtype=float), d["delta"])
    return HMMModel(
        np.array(d["pi"], dtype=float),
        np.array(d["A"], dtype=float),
        np.array(d["B"], dtype=float),
        d["mode"],
        d["delta"],
        tuple(d.get("history", ())),
    )


def dumps_model(model, clusters: ClusterModel | None = None) -> str:
    """Serialize a verifier (with its cluster model) or a bare ClusterModel."""
    if isinstance(model, ClusterModel):
        kind, body = "clusters", {"cluster_model": _clusters_to_dict(model)}
    else:
        kind = _verifier_kind(model)
        body = {"params": _verifier_to_dict(model)}
        if clusters is not None:
            body["cluster_model"] = _clusters_to_dict(clusters)
            body["vocabulary"] = {"n_clusters": clusters.n_clusters, "size": 12 * clusters.n_clusters + 13}
    body["kind"] = kind
    return f"{MODEL_MAGIC} {MODEL_VERSION} {kind}\n" + json.dumps(body, indent=1) + "\n"


def loads_model(text: str, expect: str | None = None):
    """Inverse of ``dumps_model``.

    Returns a ClusterModel for ``clusters`` files, else ``(verifier,
    cluster_model_or_None)``. ``expect`` enforces a kind.
    """
    header, _, body = text.partition("\n")
    parts = header.split()
    if len(parts) != 3 or parts[0] != MODEL_MAGIC:
        raise ModelFormatError("not a trace-auth model file")
    if parts[1] != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version {parts[1]!r} (expected {MODEL_VERSION})")
    kind = parts[2]
    if kind not in MODEL_KINDS:
        raise ModelFormatError(f"unknown model kind {kind!r}")
    if expect is not None and kind != expect:
        raise ModelFormatError(f"model kind mismatch: file holds {kind!r}, expected {expect!r}")
    try:
        data = json.loads(body)
        if data.get("kind") != kind:
            raise ModelFormatError("header kind disagrees with body")
        if kind == "clusters":
            return _clusters_from_dict(data["cluster_model"])
        clusters = _clusters_from_dict(data["cluster_model"]) if "cluster_model" in data else None
        return _verifier_from_dict(kind, data["params"]), clusters
    except ModelFormatError:
        raise
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"corrupt model file: {exc}") from None


def save_model(model, path, clusters: ClusterModel | None = None) -> None:
    Path(path).write_text(dumps_model(model, clusters), encoding="utf-8")


def load_model(path, expect: str | None = None):
    return loads_model(Path(path).read_text(encoding="utf-8"), expect)
