"""Synthetic mobility corpus standing in for sparse smartphone location logs.

Each user moves between a handful of anchor places according to a schedule
of place probabilities per (time zone, day type) slot. Location is only
logged during short phone-use sessions separated by heavy-tailed gaps.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .dataio import CorpusManifest, write_csv, write_manifest
from .geo import GeoPoint, Trace, destination, haversine_m
from .observations import daytype_of, timezone_of

SLOTS = 6  # timezone * 2 + daytype


@dataclass
class UserProfile:
    user_id: str
    places: list[tuple[float, float]]
    schedule: list[list[float]]  # SLOTS rows, one probability per place

    def __post_init__(self):
        sched = np.asarray(self.schedule, dtype=float)
        if sched.shape != (SLOTS, len(self.places)):
            raise ValueError(f"{self.user_id}: schedule must be {SLOTS} x {len(self.places)}")
        if (sched < 0).any() or not np.allclose(sched.sum(axis=1), 1.0):
            raise ValueError(f"{self.user_id}: schedule rows must be probability distributions")


@dataclass
class SynthConfig:
    users: list[UserProfile]
    start: str = "2016-03-07T00:00:00"
    days: int = 42
    interval: float = 180.0
    noise_sigma: float = 3.0
    travel_speed: float = 8.0
    switch_prob: float = 0.04
    excursion_prob: float = 0.03
    excursion_radius: float = 3000.0
    session_ticks: float = 1.0  # mean logged ticks per phone-use session
    gap_ticks: float = 15.0
    gap_shape: float = 1.5
    max_gap_ticks: int = 480  # nobody goes more than a day without the phone
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        d["users"] = [UserProfile(u["user_id"], [tuple(p) for p in u["places"]], u["schedule"]) for u in d["users"]]
        return cls(**d)


# Baseline place preferences per slot over (home, work, leisure A, leisure B).
_BASE_SCHEDULE = np.array(
    [
        [0.92, 0.02, 0.03, 0.03],  # TZ1 WD
        [0.96, 0.00, 0.02, 0.02],  # TZ1 WE
        [0.12, 0.72, 0.10, 0.06],  # TZ2 WD
        [0.40, 0.05, 0.35, 0.20],  # TZ2 WE
        [0.55, 0.15, 0.20, 0.10],  # TZ3 WD
        [0.50, 0.02, 0.23, 0.25],  # TZ3 WE
    ]
)


def default_config(n_users: int = 5, seed: int = 0, days: int = 42, **kwargs) -> SynthConfig:
    """Users with private homes, shared workplaces and overlapping leisure spots."""
    rng = np.random.default_rng([seed, 10_007])
    base_lat, base_lon = 38.9897, -76.9378

    def scatter(radius):
        r = radius * math.sqrt(rng.random())
        theta = 2 * math.pi * rng.random()
        lat, lon = destination(base_lat, base_lon, r * math.cos(theta), r * math.sin(theta))
        return round(lat, 7), round(lon, 7)

    n_work = max(1, (n_users + 1) // 2)
    works = [scatter(6000) for _ in range(n_work)]
    leisure = [scatter(6000) for _ in range(n_users + 1)]
    users = []
    for u in range(n_users):
        home = scatter(8000)
        spots = rng.choice(len(leisure), size=2, replace=False)
        places = [home, works[u % n_work], leisure[spots[0]], leisure[spots[1]]]
        schedule = [rng.dirichlet(30 * row + 0.05).tolist() for row in _BASE_SCHEDULE]
        users.append(UserProfile(f"user{u:02d}", places, schedule))
    return SynthConfig(users=users, seed=seed, days=days, **kwargs)


def _noisy(rng, lat, lon, sigma):
    if sigma <= 0:
        return lat, lon
    north, east = rng.normal(0.0, sigma, size=2)
    return destination(lat, lon, north, east)


def generate_user(profile: UserProfile, config: SynthConfig, index: int) -> Trace:
    rng = np.random.default_rng([config.seed, index])
    schedule = np.asarray(profile.schedule, dtype=float)
    step = timedelta(seconds=config.interval)
    start = datetime.fromisoformat(config.start)
    n_ticks = int(round(config.days * 86400 / config.interval))

    here = np.array(profile.places[0], dtype=float)
    path: list[np.ndarray] = []
    prev_slot = None
    logging_on = False
    remaining = 0
    points: list[GeoPoint] = []
    sessions: list[tuple[int, int]] = []
    for k in range(n_ticks):
        ts = start + k * step
        slot = timezone_of(ts) * 2 + daytype_of(ts)
        if path:
            here = path.pop(0)
        elif slot != prev_slot or rng.random() < config.switch_prob:
            if rng.random() < config.excursion_prob:
                r = config.excursion_radius * math.sqrt(rng.random())
                theta = 2 * math.pi * rng.random()
                target = np.array(destination(here[0], here[1], r * math.cos(theta), r * math.sin(theta)))
            else:
                target = np.array(profile.places[rng.choice(len(profile.places), p=schedule[slot])])
            dist = float(haversine_m(here[0], here[1], target[0], target[1]))
            if dist > 0:
                n_steps = max(1, math.ceil(dist / (config.travel_speed * config.interval)))
                path = [here + (target - here) * (s / n_steps) for s in range(1, n_steps + 1)]
                here = path.pop(0)
        prev_slot = slot

        if remaining <= 0:
            logging_on = not logging_on
            if logging_on:
                remaining = rng.geometric(1.0 / config.session_ticks)
                sessions.append((len(points), len(points)))
            else:
                remaining = min(config.max_gap_ticks, math.ceil(config.gap_ticks * (1.0 + rng.pareto(config.gap_shape))))
        remaining -= 1
        if logging_on:
            lat, lon = _noisy(rng, here[0], here[1], config.noise_sigma)
            lat = min(max(lat, -90.0), 90.0)
            points.append(GeoPoint(round(lat, 7), round(lon, 7), ts))
            s0, _ = sessions[-1]
            sessions[-1] = (s0, len(points))
    sessions = [s for s in sessions if s[1] > s[0]]
    return Trace(profile.user_id, points, sessions)


def synth_generate(config: SynthConfig) -> list[Trace]:
    """One trace per configured user; identical output for identical config."""
    return [generate_user(p, config, i) for i, p in enumerate(config.users)]


def write_corpus(traces: list[Trace], config: SynthConfig, out_dir) -> Path:
    """Write ``<user>.csv`` files plus a ``manifest.json`` describing them."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for trace in traces:
        write_csv(trace, out_dir / f"{trace.user_id}.csv")
    manifest = CorpusManifest(
        users=[{"user_id": t.user_id, "files": [f"{t.user_id}.csv"], "format": "csv"} for t in traces],
        provenance="synthetic corpus generated by pathauth.synth",
        extra={"synth_config": config.to_dict()},
    )
    write_manifest(manifest, out_dir / "manifest.json")
    return out_dir

