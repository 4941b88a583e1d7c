"""First-order Markov-chain verifier with add-delta smoothing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_DELTA = 1e-3


@dataclass(frozen=True)
class MCModel:
    prior: np.ndarray
    transitions: np.ndarray
    delta: float

    @property
    def n_symbols(self) -> int:
        return self.prior.size

    def score(self, window) -> float:
        return mc_score(self, window)

    def score_windows(self, windows) -> np.ndarray:
        return mc_score_windows(self, windows)


def train_mc(symbols, n_symbols: int, delta: float = DEFAULT_DELTA, null: int | None = None) -> MCModel:
    """Estimate the day-start prior and bigram transitions of a symbol sequence.

    ``null`` is the end-of-day symbol (defaults to ``n_symbols - 1``); the
    symbols that follow it, plus the first one, are the day-initial samples
    for the prior. Every count gets ``delta`` added before normalization, so
    a never-seen state has a uniform outgoing row.
    """
    symbols = np.asarray(symbols, dtype=np.int64).reshape(-1)
    if symbols.size < 2:
        raise ValueError("need at least 2 symbols to train a Markov chain")
    if delta <= 0:
        raise ValueError("delta must be positive")
    if symbols.min() < 0 or symbols.max() >= n_symbols:
        raise ValueError("symbol out of vocabulary")
    if null is None:
        null = n_symbols - 1

    starts = np.flatnonzero(symbols[:-1] == null) + 1
    starts = np.concatenate(([0], starts))
    prior = np.bincount(symbols[starts], minlength=n_symbols) + delta
    prior /= prior.sum()

    counts = np.zeros((n_symbols, n_symbols))
    np.add.at(counts, (symbols[:-1], symbols[1:]), 1.0)
    counts += delta
    counts /= counts.sum(axis=1, keepdims=True)
    return MCModel(prior, counts, delta)


def mc_score(model: MCModel, window) -> float:
    """Log-probability of ``window`` under the chain."""
    window = np.asarray(window, dtype=np.int64).reshape(-1)
    if window.size == 0:
        raise ValueError("empty test window")
    return float(mc_score_windows(model, window[None, :])[0])


def mc_score_windows(model: MCModel, windows) -> np.ndarray:
    windows = np.asarray(windows, dtype=np.int64)
    if windows.ndim != 2 or windows.shape[1] == 0:
        raise ValueError("empty test window")
    if windows.size and (windows.min() < 0 or windows.max() >= model.n_symbols):
        raise ValueError("symbol out of vocabulary")
    log_prior = np.log(model.prior)
    log_t = np.log(model.transitions)
    score = log_prior[windows[:, 0]]
    if windows.shape[1] > 1:
        score = score + log_t[windows[:, :-1], windows[:, 1:]].sum(axis=1)
    return score
