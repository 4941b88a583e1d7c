"""Sequence-matching baseline verifier."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SMModel:
    training_symbols: np.ndarray

    def __post_init__(self):
        symbols = np.asarray(self.training_symbols, dtype=np.int64).reshape(-1)
        if symbols.size == 0:
            raise ValueError("empty training sequence")
        object.__setattr__(self, "training_symbols", symbols)

    def score(self, window) -> float:
        return sm_score(self, window)

    def score_windows(self, windows) -> np.ndarray:
        return sm_score_windows(self, windows)


def train_sm(symbols) -> SMModel:
    return SMModel(np.asarray(symbols, dtype=np.int64))


def sm_score(model: SMModel, window) -> float:
    """Match ratio of one test window against the training sequence.

    A cursor walks the window while the training sequence is scanned left
    to right; each full pass over the window counts one complete match and
    resets the cursor. The ratio is
    ``(complete * len(window) + cursor) / (len(train) + len(window))``.
    """
    window = np.asarray(window, dtype=np.int64).reshape(-1)
    if window.size == 0:
        raise ValueError("empty test window")
    return float(sm_score_windows(model, window[None, :])[0])


def sm_score_windows(model: SMModel, windows) -> np.ndarray:
    """``sm_score`` for every row of a (W, n) window array at once."""
    windows = np.asarray(windows, dtype=np.int64)
    if windows.ndim != 2 or windows.shape[1] == 0:
        raise ValueError("empty test window")
    n_windows, n = windows.shape
    rows = np.arange(n_windows)
    cursor = np.zeros(n_windows, dtype=np.int64)
    complete = np.zeros(n_windows, dtype=np.int64)
    if n_windows:
        for symbol in model.training_symbols:
            matched = windows[rows, cursor] == symbol
            cursor += matched
            done = cursor == n
            complete += done
            cursor[done] = 0
    total = model.training_symbols.size + n
    return np.clip((complete * n + cursor) / total, 0.0, 1.0)
