"""Batch-similarity estimate of the importance-sampling exponent beta.

A uniformly drawn minibatch of state-action rows is projected by a fixed
matrix, paired against a shuffled copy of itself, and the mean scalar
projection of each row onto its partner is squashed into ``[beta0, 1]``.
Batches drawn from a replay pool full of near-identical behaviour score
high; diverse, exploratory batches score near zero.
"""

from __future__ import annotations

import numpy as np

from alap.replay import Batch


class RunningStats:
    """Per-feature mean and variance accumulated over every row seen."""

    def __init__(self, dim: int) -> None:
        self.count = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    def update(self, rows: np.ndarray) -> None:
        # Chan et al. parallel combination of (count, mean, M2)
        n = rows.shape[0]
        if n == 0:
            return
        batch_mean = rows.mean(axis=0)
        batch_m2 = ((rows - batch_mean) ** 2).sum(axis=0)
        total = self.count + n
        delta = batch_mean - self.mean
        self.mean = self.mean + delta * (n / total)
        self.m2 = self.m2 + batch_m2 + delta * delta * (self.count * n / total)
        self.count = total

    @property
    def std(self) -> np.ndarray:
        if self.count == 0:
            return np.zeros_like(self.mean)
        return np.sqrt(self.m2 / self.count)

    def normalize(self, rows: np.ndarray, tol: float = 1e-8) -> np.ndarray:
        std = self.std
        safe = np.where(std > tol, std, 1.0)
        return np.where(std > tol, (rows - self.mean) / safe, 0.0)


def orthogonal_matrix(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed random orthogonal matrix."""
    a = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(a)
    return q * np.sign(np.diag(r))


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


def projection_similarity(q, k) -> float:
    """Mean scalar projection of each query row onto its key row, over sqrt(d_k).

    Rows whose key has zero norm contribute nothing.
    """
    q = np.asarray(q, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    if q.shape != k.shape or q.ndim != 2:
        raise ValueError(f"Q and K must be equal-shape matrices, got {q.shape} and {k.shape}")
    m, d_k = q.shape
    norms = np.linalg.norm(k, axis=1)
    dots = np.einsum("ij,ij->i", q, k)
    proj = np.divide(dots, norms, out=np.zeros(m), where=norms > 0.0)
    return float(proj.sum() / m / np.sqrt(d_k))


def beta_from_similarity(raw: float, beta0: float) -> float:
    """Map a raw similarity to beta via sigmoid followed by a clamped affine map.

    ``raw = 0`` gives ``beta0``; ``raw -> inf`` gives 1.
    """
    s = sigmoid(raw)
    return float(beta0 + (1.0 - beta0) * min(max(2.0 * s - 1.0, 0.0), 1.0))


class BetaEstimator:
    """Fixed-projection self-similarity estimator for beta.

    Parameters
    ----------
    state_dim, action_dim:
        Widths of the state and action blocks. ``d_k`` is their sum.
    beta0:
        Lower end of the output range.
    rng:
        Source for the projection matrix and for every shuffle.
    """

    def __init__(self, state_dim: int, action_dim: int, beta0: float = 0.4,
                 rng: np.random.Generator | None = None, w_q: np.ndarray | None = None) -> None:
        if state_dim < 0 or action_dim < 0 or state_dim + action_dim < 1:
            raise ValueError("feature dimension must be positive")
        if not 0.0 < beta0 <= 1.0:
            raise ValueError(f"beta0 must be in (0, 1], got {beta0}")
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.d_k = state_dim + action_dim
        self.beta0 = beta0
        self.rng = np.random.default_rng() if rng is None else rng
        if w_q is None:
            w_q = orthogonal_matrix(self.d_k, self.rng)
        w_q = np.asarray(w_q, dtype=np.float64)
        if w_q.shape != (self.d_k, self.d_k) or not np.all(np.isfinite(w_q)):
            raise ValueError(f"w_q must be a finite ({self.d_k}, {self.d_k}) matrix")
        self.w_q = w_q
        self.state_stats = RunningStats(state_dim)

    def encode_batch(self, batch) -> np.ndarray:
        """Rows of z-scored state features followed by raw action features.

        Running state statistics absorb the batch before it is normalised.
        """
        if not isinstance(batch, Batch):
            batch = Batch.from_transitions(batch)
        m = len(batch)
        if m < 2:
            raise ValueError("need at least two transitions to measure similarity")
        states = np.asarray(batch.states, dtype=np.float64).reshape(m, -1)
        actions = np.asarray(batch.actions, dtype=np.float64).reshape(m, -1)
        if states.shape[1] != self.state_dim or actions.shape[1] != self.action_dim:
            raise ValueError("transition dimensions do not match the estimator")
        self.state_stats.update(states)
        return np.hstack([self.state_stats.normalize(states), actions])

    def project_and_shuffle(self, x) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=np.float64)
        if not np.all(np.isfinite(x)):
            raise ValueError("encoded batch contains non-finite values")
        q = x @ self.w_q
        k = q[self.rng.permutation(q.shape[0])]
        return q, k

    def similarity(self, batch) -> float:
        q, k = self.project_and_shuffle(self.encode_batch(batch))
        return projection_similarity(q, k)

    def beta(self, batch) -> float:
        return beta_from_similarity(self.similarity(batch), self.beta0)

    __call__ = beta
