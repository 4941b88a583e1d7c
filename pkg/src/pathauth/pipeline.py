"""Enrollment pipeline: resample, cluster, encode, train one verifier."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .clustering import (
    DEFAULT_MIN_PTS,
    DEFAULT_TRANSIT_SPEED,
    DEFAULT_UNKNOWN_RADIUS_M,
    ClusterModel,
    build_cluster_model,
)
from .geo import Trace, resample
from .observations import ObservationSequence, Vocabulary, build_sequence
from .verifiers import hmm, mc, sm

SM = "sm"
MC = "mc"
MSHMM = "mshmm"
HMM_LAP = "hmm-lap"
METHODS = (SM, MC, MSHMM, HMM_LAP)
HMM_MODES = {MSHMM: hmm.MARGINAL, HMM_LAP: hmm.LAPLACE}


@dataclass
class PipelineConfig:
    """Every knob of the enrollment and scoring pipeline.

    Defaults follow the headline configuration: 20 m clusters, 10 hidden
    states, windows of 16 observations, 3-minute resampling.
    """

    methods: list[str] = field(default_factory=lambda: [SM, MC, MSHMM, HMM_LAP])
    n_values: list[int] = field(default_factory=lambda: [1, 2, 4, 8, 16])
    r_max: float = 20.0
    min_pts: int = DEFAULT_MIN_PTS
    unknown_radius: float = DEFAULT_UNKNOWN_RADIUS_M
    transit_speed: float = DEFAULT_TRANSIT_SPEED
    interval: float = 180.0
    max_gap: float = 3600.0
    hidden: int = hmm.DEFAULT_HIDDEN
    delta: float = hmm.DEFAULT_DELTA
    mc_delta: float = mc.DEFAULT_DELTA
    max_iters: int = hmm.DEFAULT_MAX_ITERS
    tol: float = hmm.DEFAULT_TOL
    seed: int = 0
    split: str = "chrono"
    train_fraction: float = 0.7
    train_weeks: int = 5
    eval_week: int = 6
    stride: int = 1
    workers: int = 1

    def __post_init__(self):
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown method(s) {unknown}; choose from {list(METHODS)}")
        if any(n < 1 for n in self.n_values):
            raise ValueError("window lengths must be >= 1")
        if self.split not in ("chrono", "weekly"):
            raise ValueError(f"unknown split {self.split!r}")
        if self.split == "weekly" and not 1 <= self.train_weeks < self.eval_week:
            raise ValueError("weekly split needs 1 <= train_weeks < eval_week")
        if self.r_max <= 0:
            raise ValueError("r_max must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


def preprocess(trace: Trace, config: PipelineConfig) -> Trace:
    return resample(trace, config.interval, config.max_gap)


def fit_clusters(trace: Trace, config: PipelineConfig) -> ClusterModel:
    return build_cluster_model(
        trace.user_id,
        trace.points,
        config.r_max,
        config.min_pts,
        config.unknown_radius,
        config.transit_speed,
    )


def vocabulary(clusters: ClusterModel) -> Vocabulary:
    return Vocabulary.for_clusters(clusters.n_clusters)


def train_verifier(method: str, seq: ObservationSequence, vocab: Vocabulary, config: PipelineConfig, seed=None):
    if method == SM:
        return sm.train_sm(seq.symbols)
    if method == MC:
        return mc.train_mc(seq.symbols, vocab.size, config.mc_delta, vocab.null)
    if method in HMM_MODES:
        return hmm.train_mshmm(
            seq.symbols,
            vocab,
            hidden=config.hidden,
            mode=HMM_MODES[method],
            delta=config.delta,
            max_iters=config.max_iters,
            tol=config.tol,
            seed=config.seed if seed is None else seed,
        )
    raise ValueError(f"unknown method {method!r}")


def method_of(model) -> str:
    if isinstance(model, sm.SMModel):
        return SM
    if isinstance(model, mc.MCModel):
        return MC
    if isinstance(model, hmm.HMMModel):
        return MSHMM if model.mode == hmm.MARGINAL else HMM_LAP
    raise TypeError(f"not a verifier model: {type(model).__name__}")


def score_windows(model, windows: np.ndarray) -> np.ndarray:
    """Score a (W, n) window array; higher means more likely genuine."""
    if len(windows) == 0:
        return np.empty(0)
    return model.score_windows(windows)
