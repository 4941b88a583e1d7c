"""Windowed genuine/impostor scoring, ROC curves and equal error rates."""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .geo import Trace
from .observations import build_sequence
from .pipeline import (
    HMM_MODES,
    PipelineConfig,
    fit_clusters,
    preprocess,
    score_windows,
    train_verifier,
    vocabulary,
)

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("user", "method", "n", "r_max", "hidden", "mode", "eer")
ROC_COLUMNS = ("user", "method", "n", "threshold", "far", "frr")


class InsufficientDataError(ValueError):
    pass


def _num(x: float) -> str:
    """Integral values without a trailing ``.0``; others round-trip exactly."""
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)


def make_windows(seq, n: int, stride: int = 1) -> np.ndarray:
    """All length-``n`` windows at the given stride as a (W, n) array."""
    if n < 1:
        raise ValueError("window length must be >= 1")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    symbols = np.asarray(getattr(seq, "symbols", seq), dtype=np.int64).reshape(-1)
    if symbols.size < n:
        return np.empty((0, n), dtype=np.int64)
    return np.lib.stride_tricks.sliding_window_view(symbols, n)[::stride].copy()


def chronological_split(seq, fraction: float = 0.7):
    """First ``floor(fraction * len)`` items train, the rest test."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    k = int(np.floor(fraction * len(seq)))
    return seq[:k], seq[k:]


def week_index(ts: datetime, first: datetime) -> int:
    """1-based 7-day block counted from the date of ``first``."""
    return (ts.date() - first.date()).days // 7 + 1


def weekly_split(seq, train_weeks: int, eval_week: int):
    """Train on the ``train_weeks`` weeks before ``eval_week``; test on ``eval_week``."""
    if not 1 <= train_weeks < eval_week:
        raise ValueError("need 1 <= train_weeks < eval_week")
    stamps = seq.timestamps
    if not stamps:
        raise InsufficientDataError("empty sequence")
    weeks = [week_index(ts, stamps[0]) for ts in stamps]
    if max(weeks) < eval_week:
        raise InsufficientDataError(f"only {max(weeks)} week(s) of data, need {eval_week}")
    lo = eval_week - train_weeks
    train = [i for i, w in enumerate(weeks) if lo <= w < eval_week]
    test = [i for i, w in enumerate(weeks) if w == eval_week]
    return seq.take(train), seq.take(test)


@dataclass
class ScoreSet:
    genuine: np.ndarray
    impostor: np.ndarray
    method: str = ""
    params: dict = field(default_factory=dict)


class EERResult(NamedTuple):
    eer: float
    threshold: float
    roc: np.ndarray  # rows of (threshold, far, frr)


def compute_eer(scores, impostor=None) -> EERResult:
    """Equal error rate of genuine vs impostor scores (higher = more genuine).

    Accepts a ``ScoreSet`` or two score arrays. Thresholds sweep the merged
    score support plus one point above the maximum; ``FAR`` counts impostors
    at or above the threshold and ``FRR`` genuines below it. The crossing is
    interpolated linearly between the two thresholds where ``FAR - FRR``
    changes sign.
    """
    if impostor is None:
        genuine, impostor = scores.genuine, scores.impostor
    else:
        genuine = scores
    g = np.sort(np.asarray(genuine, dtype=float).reshape(-1))
    imp = np.sort(np.asarray(impostor, dtype=float).reshape(-1))
    if g.size == 0 or imp.size == 0:
        raise ValueError("insufficient scores")
    if np.isnan(g).any() or np.isnan(imp).any():
        raise ValueError("scores contain NaN")
    thresholds = np.unique(np.concatenate([g, imp]))
    thresholds = np.append(thresholds, np.nextafter(thresholds[-1], np.inf))
    far = (imp.size - np.searchsorted(imp, thresholds, side="left")) / imp.size
    frr = np.searchsorted(g, thresholds, side="left") / g.size
    diff = far - frr
    k = int(np.argmax(diff <= 0))
    if diff[k] == 0:
        eer, threshold = far[k], thresholds[k]
    else:
        s = diff[k - 1] / (diff[k - 1] - diff[k])
        eer = far[k - 1] + s * (far[k] - far[k - 1])
        with np.errstate(invalid="ignore"):
            threshold = thresholds[k - 1] + s * (thresholds[k] - thresholds[k - 1])
    roc = np.column_stack([thresholds, far, frr])
    return EERResult(float(eer), float(threshold), roc)


@dataclass
class ResultRow:
    user: str
    method: str
    n: int
    r_max: float
    hidden: int | None
    mode: str | None
    eer: float

    def csv_fields(self) -> list[str]:
        return [
            self.user,
            self.method,
            str(self.n),
            _num(self.r_max),
            "" if self.hidden is None else str(self.hidden),
            self.mode or "",
            repr(self.eer),
        ]


@dataclass
class EvalReport:
    rows: list[ResultRow]
    roc: dict[tuple[str, str, int], np.ndarray]
    config: dict
    excluded: list[str] = field(default_factory=list)

    def pooled(self, method: str, n: int) -> float:
        """Mean of the per-user EERs for one (method, n) cell."""
        values = [r.eer for r in self.rows if r.method == method and r.n == n]
        return float(np.mean(values)) if values else float("nan")

    def cells(self) -> list[tuple[str, int]]:
        seen = []
        for r in self.rows:
            if (r.method, r.n) not in seen:
                seen.append((r.method, r.n))
        return seen

    def users(self) -> list[str]:
        return list(dict.fromkeys(r.user for r in self.rows))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in self.rows:
            writer.writerow(row.csv_fields())
        return buf.getvalue()

    def roc_to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(ROC_COLUMNS)
        for (user, method, n), points in self.roc.items():
            for thr, far, frr in points:
                writer.writerow([user, method, n, repr(float(thr)), repr(float(far)), repr(float(frr))])
        return buf.getvalue()

    def summary(self) -> str:
        lines = ["pooled EER (mean over users)", f"{'method':<10}{'n':>5}{'EER':>10}"]
        for method, n in self.cells():
            lines.append(f"{method:<10}{n:>5}{self.pooled(method, n):>10.4f}")
        if self.excluded:
            lines.append("excluded users: " + ", ".join(self.excluded))
        return "\n".join(lines) + "\n"


def split_trace(trace: Trace, config: PipelineConfig):
    """Train/test split of a resampled trace as selected by ``config.split``."""
    if config.split == "weekly":
        return weekly_split(trace, config.train_weeks, config.eval_week)
    return chronological_split(trace, config.train_fraction)


def _evaluate_user(index: int, user: str, splits: dict, config: PipelineConfig):
    train_trace, _ = splits[user]
    clusters = fit_clusters(train_trace, config)
    vocab = vocabulary(clusters)
    train_seq = build_sequence(train_trace, clusters)
    tests = {v: build_sequence(test, clusters) for v, (_, test) in splits.items()}

    rows, rocs = [], {}
    for method in config.methods:
        model = train_verifier(method, train_seq, vocab, config, seed=[config.seed, index])
        hidden = config.hidden if method in HMM_MODES else None
        mode = HMM_MODES.get(method)
        for n in config.n_values:
            genuine = score_windows(model, make_windows(tests[user], n, config.stride))
            impostor = np.concatenate(
                [np.empty(0)]
                + [
                    score_windows(model, make_windows(seq, n, config.stride))
                    for v, seq in tests.items()
                    if v != user
                ]
            )
            if genuine.size == 0 or impostor.size == 0:
                logger.warning("user %s: no %s windows of length %d, skipped", user,
                               "genuine" if genuine.size == 0 else "impostor", n)
                continue
            result = compute_eer(genuine, impostor)
            rows.append(ResultRow(user, method, n, config.r_max, hidden, mode, result.eer))
            rocs[(user, method, n)] = result.roc
    return rows, rocs


def run_benchmark(
    corpus: Mapping[str, Trace] | Sequence[Trace], config: PipelineConfig | None = None, **overrides
) -> EvalReport:
    """Enroll every user and score all genuine and impostor test windows.

    Each user's model is trained on their own training split; impostor
    windows come from every other user's test split, re-encoded with the
    enrolled user's clusters.
    """
    config = replace(config or PipelineConfig(), **overrides)
    if not isinstance(corpus, Mapping):
        corpus = {t.user_id: t for t in corpus}
    if len(corpus) < 2:
        raise ValueError("need >= 2 users for impostor scores")

    splits, excluded = {}, []
    for user in sorted(corpus):
        trace = preprocess(corpus[user], config)
        try:
            train, test = split_trace(trace, config)
        except InsufficientDataError as exc:
            logger.warning("user %s excluded: %s", user, exc)
            excluded.append(user)
            continue
        if len(train) == 0:
            logger.warning("user %s excluded: no training points", user)
            excluded.append(user)
            continue
        splits[user] = (train, test)
    if len(splits) < 2:
        raise ValueError("need >= 2 users for impostor scores")

    users = list(splits)
    jobs = [(i, u, splits, config) for i, u in enumerate(users)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_evaluate_user, *zip(*jobs)))
    else:
        results = [_evaluate_user(*job) for job in jobs]

    rows, rocs = [], {}
    for user_rows, user_rocs in results:
        rows.extend(user_rows)
        rocs.update(user_rocs)
    return EvalReport(rows, rocs, config.to_dict(), excluded)
