"""Nested prediction sets for a threshold ``lam`` and oracle sets for a level ``alpha``.

Both greedy constructions start from the point prediction and grow the
interval one class at a time until it covers the whole label range, giving
``K`` nested sets (a *chain*).  The set for a threshold ``lam`` is the first
chain element that is admissible at ``lam``:

* weighted family: ``1 - sum_{i in [l,u]} h(i) p(i) <= lam``
* divergence family: ``R(l, u) <= lam``

Larger ``lam`` therefore gives smaller sets.  A weighted chain may never
become admissible when ``sum_i h(i) p(i) < 1 - lam``; the full range is
returned in that case (its loss is 0).

Chains are built for whole score matrices at once (:func:`chain_table`);
the per-vector functions are thin wrappers around it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    DIVERGENCE,
    WEIGHTED,
    LossSpec,
    PredictionSet,
    ScoreVector,
    ValidationError,
    WeightScheme,
)
from .losses import interval_risk_divergence


@dataclass(frozen=True)
class GreedyChain:
    steps: tuple[PredictionSet, ...]
    step_stat: tuple[float, ...]
    thresholds: tuple[float, ...]
    family: str

    def __len__(self):
        return len(self.steps)

    def set_at(self, lam: float) -> PredictionSet:
        for s, t in zip(self.steps, self.thresholds):
            if t <= lam:
                return s
        return self.steps[-1]


@dataclass(frozen=True)
class ChainTable:
    """Greedy chains for ``n`` score vectors, stored as ``(n, K)`` arrays.

    ``thresholds[:, j]`` is the smallest ``lam`` at which step ``j`` is
    admissible; it is non-increasing along ``j``.
    """

    family: str
    lower: np.ndarray
    upper: np.ndarray
    stat: np.ndarray
    thresholds: np.ndarray
    yhat: np.ndarray

    @property
    def K(self) -> int:
        return self.lower.shape[1]

    def __len__(self):
        return self.lower.shape[0]

    def index_at(self, lam: float) -> np.ndarray:
        j = np.count_nonzero(self.thresholds > lam, axis=1)
        return np.minimum(j, self.K - 1)

    def bounds_at(self, lam: float) -> tuple[np.ndarray, np.ndarray]:
        j = self.index_at(lam)[:, None]
        lo = np.take_along_axis(self.lower, j, axis=1)[:, 0]
        hi = np.take_along_axis(self.upper, j, axis=1)[:, 0]
        return lo, hi

    def subset(self, idx) -> "ChainTable":
        return ChainTable(
            self.family,
            self.lower[idx],
            self.upper[idx],
            self.stat[idx],
            self.thresholds[idx],
            self.yhat[idx],
        )

    def chain(self, i: int) -> GreedyChain:
        steps = tuple(PredictionSet(a, b) for a, b in zip(self.lower[i], self.upper[i]))
        return GreedyChain(
            steps, tuple(self.stat[i].tolist()), tuple(self.thresholds[i].tolist()), self.family
        )


def _weighted_table(P: np.ndarray, h: np.ndarray) -> ChainTable:
    n, K = P.shape
    s = P * h
    if np.any(s.max(axis=1) <= 0):
        raise ValidationError("no admissible point prediction: all weighted scores are zero")
    rows = np.arange(n)
    l = s.argmax(axis=1)
    u = l.copy()
    mass = s[rows, l]
    lower = np.empty((n, K), dtype=np.int64)
    upper = np.empty((n, K), dtype=np.int64)
    stat = np.empty((n, K))
    lower[:, 0], upper[:, 0], stat[:, 0] = l, u, mass
    for j in range(1, K):
        left = np.where(l > 0, s[rows, np.maximum(l - 1, 0)], -np.inf)
        right = np.where(u < K - 1, s[rows, np.minimum(u + 1, K - 1)], -np.inf)
        go_left = left > right  # ties extend the upper end
        l = l - go_left
        u = u + ~go_left
        mass = mass + np.where(go_left, left, right)
        lower[:, j], upper[:, j], stat[:, j] = l, u, mass
    return ChainTable(WEIGHTED, lower, upper, stat, 1.0 - stat, lower[:, 0].copy())


def _divergence_table(P: np.ndarray) -> ChainTable:
    n, K = P.shape
    rows = np.arange(n)
    head = np.cumsum(P, axis=1)
    tail = np.cumsum(P[:, ::-1], axis=1)[:, ::-1]
    # R(l, u) * (K-1) = sum_{j<l} head(j) + sum_{j>u} tail(j); both prefix
    # sums are exactly 0 at the range ends, so the full range has risk 0.
    zeros = np.zeros((n, 1))
    head_acc = np.hstack([zeros, np.cumsum(head, axis=1)])
    tail_acc = np.hstack([np.cumsum(tail[:, ::-1], axis=1)[:, ::-1], zeros])
    scale = 1.0 / (K - 1) if K > 1 else 0.0

    def residual(l, u):
        return (head_acc[rows, l] + tail_acc[rows, u + 1]) * scale

    l = P.argmax(axis=1)
    u = l.copy()
    lower = np.empty((n, K), dtype=np.int64)
    upper = np.empty((n, K), dtype=np.int64)
    stat = np.empty((n, K))
    lower[:, 0], upper[:, 0], stat[:, 0] = l, u, residual(l, u)
    for j in range(1, K):
        left = np.where(l > 0, head[rows, np.maximum(l - 1, 0)], -np.inf)
        right = np.where(u < K - 1, tail[rows, np.minimum(u + 1, K - 1)], -np.inf)
        go_left = left >= right  # ties extend the lower end
        l = l - go_left
        u = u + ~go_left
        lower[:, j], upper[:, j], stat[:, j] = l, u, residual(l, u)
    return ChainTable(DIVERGENCE, lower, upper, stat, stat.copy(), lower[:, 0].copy())


def chain_table(P, loss: LossSpec) -> ChainTable:
    """Greedy chains for every row of the score matrix ``P``."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    loss.check_K(P.shape[1])
    if loss.is_weighted:
        return _weighted_table(P, loss.weights.weights)
    return _divergence_table(P)


def point_prediction(scores: ScoreVector, loss: LossSpec) -> int:
    """Argmax of ``h(i) p(i)`` (weighted) or ``p(i)`` (divergence); ties go low."""
    loss.check_K(scores.K)
    s = scores.probs * loss.weights.weights if loss.is_weighted else scores.probs
    if s.max() <= 0:
        raise ValidationError("no admissible point prediction: all weighted scores are zero")
    return int(np.argmax(s))


def weighted_chain(scores: ScoreVector, w: WeightScheme) -> GreedyChain:
    return chain_table(scores.probs, LossSpec.weighted(w)).chain(0)


def divergence_chain(scores: ScoreVector) -> GreedyChain:
    return chain_table(scores.probs, LossSpec.divergence()).chain(0)


def greedy_chain(scores: ScoreVector, loss: LossSpec) -> GreedyChain:
    return chain_table(scores.probs, loss).chain(0)


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"lambda must lie in [0, 1], got {lam}")
    return lam


def build_weighted_set(scores: ScoreVector, w: WeightScheme, lam: float) -> PredictionSet:
    return weighted_chain(scores, w).set_at(_check_lambda(lam))


def build_divergence_set(scores: ScoreVector, lam: float) -> PredictionSet:
    return divergence_chain(scores).set_at(_check_lambda(lam))


def build_set(scores: ScoreVector, loss: LossSpec, lam: float) -> PredictionSet:
    return greedy_chain(scores, loss).set_at(_check_lambda(lam))


def oracle_weighted_set(posterior: ScoreVector, w: WeightScheme, alpha: float) -> PredictionSet:
    """Narrowest interval whose weighted mass reaches ``D(x) - alpha``.

    Exhaustive over all intervals.  Ties: larger covered mass, then the
    interval containing the point prediction, then the smaller lower end.
    """
    if w.K != posterior.K:
        raise ValidationError("dimension mismatch between posterior and weights")
    K = posterior.K
    s = w.weights * posterior.probs
    yhat = int(np.argmax(s))
    cs = np.concatenate([[0.0], np.cumsum(s)])
    need = cs[K] - alpha
    for width in range(1, K + 1):
        feasible = []
        for l in range(K - width + 1):
            u = l + width - 1
            mass = cs[u + 1] - cs[l]
            if mass >= need:
                feasible.append((-mass, not (l <= yhat <= u), l))
        if feasible:
            _, _, l = min(feasible)
            return PredictionSet(l, l + width - 1)
    return PredictionSet(0, K - 1)


def oracle_divergence_set(posterior: ScoreVector, alpha: float) -> PredictionSet:
    """Narrowest interval with divergence risk at most ``alpha``.

    Exhaustive over all intervals.  Ties: smaller risk, then smaller lower end.
    """
    K = posterior.K
    if K == 1:
        return PredictionSet(0, 0)
    for width in range(1, K + 1):
        feasible = []
        for l in range(K - width + 1):
            pset = PredictionSet(l, l + width - 1)
            r = interval_risk_divergence(posterior, pset)
            if r <= alpha:
                feasible.append((r, l))
        if feasible:
            _, l = min(feasible)
            return PredictionSet(l, l + width - 1)
    return PredictionSet(0, K - 1)
