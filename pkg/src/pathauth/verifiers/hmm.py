"""Discrete HMM verifier trained by a modified Baum-Welch.

Two smoothing modes decide the emission probability of vocabulary symbols
that never occur in the training sequence:

``"marginal"``
    product of the (location, time zone) and (location, day type) expected
    frequencies under each hidden state, so an unseen
    ``home/night/weekend`` borrows mass from ``home/night/*`` and
    ``home/*/weekend``.
``"laplace"``
    the bare ``delta / (sum(gamma) + T * delta)`` pseudo-count.

Seen symbols use the add-delta expected-count ratio in both modes. The
forward-backward pass is scaled per time step so long day-concatenated
training sequences do not underflow.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..observations import Vocabulary

logger = logging.getLogger(__name__)

MARGINAL = "marginal"
LAPLACE = "laplace"
MODES = (MARGINAL, LAPLACE)

DEFAULT_HIDDEN = 10
DEFAULT_DELTA = 1e-3
DEFAULT_MAX_ITERS = 200
DEFAULT_TOL = 1e-6

_TINY = np.finfo(float).tiny


@dataclass(frozen=True)
class HMMModel:
    pi: np.ndarray
    A: np.ndarray
    B: np.ndarray
    mode: str = MARGINAL
    delta: float = DEFAULT_DELTA
    history: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown smoothing mode {self.mode!r}")
        h = self.pi.shape[0]
        if self.A.shape != (h, h) or self.B.ndim != 2 or self.B.shape[0] != h:
            raise ValueError("inconsistent HMM parameter shapes")

    @property
    def hidden(self) -> int:
        return self.pi.shape[0]

    @property
    def n_symbols(self) -> int:
        return self.B.shape[1]

    def score(self, window) -> float:
        return mshmm_score(self, window)

    def score_windows(self, windows) -> np.ndarray:
        return forward_windows(self, windows) / np.asarray(windows).shape[1]


@dataclass
class Trellis:
    """Scaled forward/backward quantities for one observation sequence.

    ``alpha[t]`` is normalized to sum 1 and ``scale[t]`` holds the
    normalizer, so the sequence log-likelihood is ``log(scale).sum()``.
    ``beta`` is scaled by the same factors, which makes
    ``alpha[t] * beta[t]`` the state posterior directly.
    """

    alpha: np.ndarray
    beta: np.ndarray
    scale: np.ndarray
    gamma: np.ndarray
    xi: np.ndarray

    @property
    def loglik(self) -> float:
        return float(np.log(self.scale).sum())


def _as_obs(model: HMMModel, window) -> np.ndarray:
    obs = np.asarray(window, dtype=np.int64).reshape(-1)
    if obs.size == 0:
        raise ValueError("empty observation window")
    if obs.min() < 0 or obs.max() >= model.n_symbols:
        raise ValueError("symbol out of vocabulary")
    return obs


def _normalize(x: np.ndarray) -> np.ndarray:
    # The floor only bites on exact zeros; it keeps every row strictly positive.
    x = np.maximum(x, _TINY)
    return x / x.sum(axis=-1, keepdims=True)


def forward(model: HMMModel, window) -> tuple[float, np.ndarray, np.ndarray]:
    """Scaled forward pass; returns ``(loglik, alpha, scale)``."""
    obs = _as_obs(model, window)
    emit = model.B[:, obs].T
    T, H = emit.shape
    alpha = np.empty((T, H))
    scale = np.empty(T)
    a = model.pi * emit[0]
    for t in range(T):
        if t:
            a = (a @ model.A) * emit[t]
        c = a.sum()
        scale[t] = c
        if c == 0.0:
            alpha[t:] = 0.0
            scale[t:] = 0.0
            return float("-inf"), alpha, scale
        a = a / c
        alpha[t] = a
    return float(np.log(scale).sum()), alpha, scale


def backward(model: HMMModel, window, scale: np.ndarray | None = None) -> np.ndarray:
    """Scaled backward pass with ``beta[T-1] = 1``."""
    obs = _as_obs(model, window)
    if scale is None:
        _, _, scale = forward(model, obs)
    emit = model.B[:, obs].T
    T, H = emit.shape
    beta = np.empty((T, H))
    b = np.ones(H)
    beta[-1] = b
    for t in range(T - 2, -1, -1):
        b = model.A @ (emit[t + 1] * b) / scale[t + 1]
        beta[t] = b
    return beta


def e_step(model: HMMModel, window) -> Trellis:
    obs = _as_obs(model, window)
    loglik, alpha, scale = forward(model, obs)
    if not np.isfinite(loglik):
        raise ValueError("sequence has zero likelihood under the model")
    beta = backward(model, obs, scale)
    gamma = alpha * beta
    gamma /= gamma.sum(axis=1, keepdims=True)
    emit = model.B[:, obs].T
    xi = (
        alpha[:-1, :, None]
        * model.A[None, :, :]
        * (emit[1:] * beta[1:])[:, None, :]
        / scale[1:, None, None]
    )
    return Trellis(alpha, beta, scale, gamma, xi)


def emission_update(
    gamma: np.ndarray, window, vocab: Vocabulary, mode: str = MARGINAL, delta: float = DEFAULT_DELTA
) -> np.ndarray:
    """Emission re-estimate before row normalization, shape (H, V)."""
    if mode not in MODES:
        raise ValueError(f"unknown smoothing mode {mode!r}")
    obs = np.asarray(window, dtype=np.int64).reshape(-1)
    T, H = gamma.shape
    V = vocab.size
    counts = np.zeros((V, H))
    np.add.at(counts, obs, gamma)
    counts = counts.T
    denom = (gamma.sum(axis=0) + T * delta)[:, None]

    b_hat = (counts + delta) / denom
    unseen = np.bincount(obs, minlength=V) == 0
    b_hat[:, unseen] = delta / denom

    if mode == MARGINAL:
        dec = vocab.decomposable
        target = np.flatnonzero(unseen & dec)
        if target.size:
            n_loc = int(vocab.location.max()) + 1
            loc_tz = vocab.location * 3 + vocab.timezone
            loc_day = vocab.location * 2 + vocab.daytype
            by_loc_tz = np.zeros((H, n_loc * 3))
            by_loc_day = np.zeros((H, n_loc * 2))
            src = np.flatnonzero(dec)
            np.add.at(by_loc_tz.T, loc_tz[src], counts[:, src].T)
            np.add.at(by_loc_day.T, loc_day[src], counts[:, src].T)
            b_hat[:, target] = (
                (by_loc_tz[:, loc_tz[target]] + delta) / denom
                * ((by_loc_day[:, loc_day[target]] + delta) / denom)
            )
    return b_hat


def m_step(
    trellis: Trellis, window, vocab: Vocabulary, mode: str = MARGINAL, delta: float = DEFAULT_DELTA
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    gamma, xi = trellis.gamma, trellis.xi
    if gamma.shape[0] < 2:
        raise ValueError("need at least 2 observations for a transition update")
    pi = _normalize(gamma[0])
    A = _normalize(xi.sum(axis=0) / gamma[:-1].sum(axis=0)[:, None])
    B = _normalize(emission_update(gamma, window, vocab, mode, delta))
    return pi, A, B


def random_model(
    hidden: int, n_symbols: int, seed=0, mode: str = MARGINAL, delta: float = DEFAULT_DELTA
) -> HMMModel:
    rng = np.random.default_rng(seed)
    pi = rng.dirichlet(np.ones(hidden))
    A = rng.dirichlet(np.ones(hidden), size=hidden)
    B = rng.dirichlet(np.ones(n_symbols), size=hidden)
    return HMMModel(pi, A, B, mode, delta)


def train_mshmm(
    symbols,
    vocab: Vocabulary,
    hidden: int = DEFAULT_HIDDEN,
    mode: str = MARGINAL,
    delta: float = DEFAULT_DELTA,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
    seed=0,
    callback: Callable[[int, float, HMMModel], None] | None = None,
) -> HMMModel:
    """Fit an HMM to one concatenated training sequence.

    Iterates E and M steps from a seeded Dirichlet initialization until the
    relative log-likelihood change drops below ``tol`` or ``max_iters`` is
    reached. ``callback(iteration, loglik, model)`` sees every updated
    model; the log-likelihood trace is kept on ``model.history``.
    """
    obs = np.asarray(symbols, dtype=np.int64).reshape(-1)
    if obs.size < 2:
        raise ValueError("need at least 2 observations to train an HMM")
    if delta < 0:
        raise ValueError("delta must be non-negative")
    model = random_model(hidden, vocab.size, seed, mode, delta)
    _as_obs(model, obs)
    history: list[float] = []
    for it in range(max_iters):
        trellis = e_step(model, obs)
        ll = trellis.loglik
        logger.debug("iter %d loglik %.10f", it, ll)
        converged = bool(history) and abs(ll - history[-1]) <= tol * abs(history[-1])
        history.append(ll)
        if converged:
            break
        pi, A, B = m_step(trellis, obs, vocab, mode, delta)
        model = HMMModel(pi, A, B, mode, delta)
        if callback is not None:
            callback(it, ll, model)
    return HMMModel(model.pi, model.A, model.B, mode, delta, tuple(history))


def forward_windows(model: HMMModel, windows) -> np.ndarray:
    """Forward log-likelihood of every row of a (W, n) window array."""
    windows = np.asarray(windows, dtype=np.int64)
    if windows.ndim != 2 or windows.shape[1] == 0:
        raise ValueError("empty observation window")
    if windows.size and (windows.min() < 0 or windows.max() >= model.n_symbols):
        raise ValueError("symbol out of vocabulary")
    emit = model.B.T[windows]
    loglik = np.zeros(windows.shape[0])
    a = model.pi[None, :] * emit[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        for t in range(windows.shape[1]):
            if t:
                a = (a @ model.A) * emit[:, t]
            c = a.sum(axis=1)
            loglik += np.log(c)
            a = a / np.where(c > 0, c, 1.0)[:, None]
    return loglik


def mshmm_score(model: HMMModel, window) -> float:
    """Per-symbol forward log-likelihood of one window."""
    obs = _as_obs(model, window)
    loglik, _, _ = forward(model, obs)
    return loglik / obs.size
