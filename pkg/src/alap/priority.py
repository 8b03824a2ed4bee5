"""Sampling probabilities, importance weights and losses for PER, LAP and ALAP."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class Scheme(str, enum.Enum):
    UNIFORM = "uniform"
    PER = "per"
    LAP = "lap"
    ALAP = "alap"


@dataclass(frozen=True)
class SchemeConfig:
    """Replay hyperparameters shared by every prioritized scheme."""

    scheme: Scheme = Scheme.ALAP
    alpha: float = 0.6
    beta0: float = 0.4
    epsilon: float = 1e-6
    # normalise importance weights by the buffer-wide max instead of the batch max
    buffer_max_weights: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 < self.beta0 <= 1.0:
            raise ValueError(f"beta0 must be in (0, 1], got {self.beta0}")
        if not self.epsilon > 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    @property
    def prioritized(self) -> bool:
        return self.scheme is not Scheme.UNIFORM

    @property
    def clip_priorities(self) -> bool:
        return self.scheme is Scheme.LAP


def _as_finite(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if np.any(np.isnan(arr)):
        raise ValueError(f"{name} contains NaN")
    return arr


def per_probability(priorities, alpha: float) -> np.ndarray:
    """P(i) = p_i^alpha / sum_j p_j^alpha."""
    p = _as_finite(priorities, "priorities")
    if np.any(p <= 0) or not np.all(np.isfinite(p)):
        raise ValueError("priorities must be finite and strictly positive")
    scaled = p ** alpha
    return scaled / scaled.sum()


def lap_probability(td_magnitudes, alpha: float) -> np.ndarray:
    """LAP clipped probabilities: max(|d|^alpha, 1) / sum_j max(|d_j|^alpha, 1)."""
    d = np.abs(_as_finite(td_magnitudes, "td_magnitudes"))
    if not np.all(np.isfinite(d)):
        raise ValueError("td_magnitudes must be finite")
    clipped = np.maximum(d ** alpha, 1.0)
    return clipped / clipped.sum()


def importance_weights(probabilities, n: int, beta: float, max_weight: float | None = None) -> np.ndarray:
    """Normalised importance-sampling weights ``w / max w`` with ``w = (n P)^-beta``.

    By default the max is taken over the given batch. Pass ``max_weight`` to
    normalise by an externally computed maximum (e.g. over the whole buffer).
    """
    p = _as_finite(probabilities, "probabilities")
    if np.any(p <= 0):
        raise ValueError("probabilities must be strictly positive")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must be in [0, 1], got {beta}")
    w = (n * p) ** (-beta)
    denom = w.max() if max_weight is None else max_weight
    return w / denom


def huber_loss(delta):
    """Huber loss with unit threshold and its derivative.

    ``0.5 d^2`` inside the unit interval, ``|d| - 0.5`` outside, so both
    pieces meet at 0.5. Works on scalars and arrays; returns
    ``(loss, dloss_ddelta)``.
    """
    d = _as_finite(delta, "delta")
    abs_d = np.abs(d)
    small = abs_d <= 1.0
    loss = np.where(small, 0.5 * d * d, abs_d - 0.5)
    grad = np.where(small, d, np.sign(d))
    if loss.ndim == 0:
        return float(loss), float(grad)
    return loss, grad


def weighted_loss(deltas, weights):
    """Batch-mean importance-weighted Huber loss.

    Returns ``(loss, factors)`` where ``factors[i]`` is dLoss/d(delta_i), i.e.
    ``w_i * huber'(delta_i) / m``.
    """
    d = np.asarray(deltas, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if d.shape != w.shape or d.ndim != 1:
        raise ValueError(f"deltas and weights must be equal-length vectors, got {d.shape} and {w.shape}")
    m = d.shape[0]
    loss, grad = huber_loss(d)
    return float(np.sum(w * loss) / m), w * grad / m


def linear_beta(episode: int, total_episodes: int, beta0: float) -> float:
    """Anneal beta linearly from ``beta0`` at episode 0 to 1 at the last episode."""
    if total_episodes <= 0:
        raise ValueError("total_episodes must be positive")
    beta = beta0 + (1.0 - beta0) * episode / total_episodes
    return float(min(max(beta, beta0), 1.0))
