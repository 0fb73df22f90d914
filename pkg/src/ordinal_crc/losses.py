"""Set-valued losses ``L(y, [l, u])`` and conditional interval risks."""

from __future__ import annotations

import numpy as np

from .core import LossSpec, PredictionSet, ScoreVector, ValidationError, WeightScheme


def _check_set(s: PredictionSet, K: int) -> None:
    if s.upper >= K:
        raise ValidationError(f"dimension mismatch: set {s} for K={K}")


def _check_label(y: int, K: int) -> None:
    if not 0 <= y < K:
        raise ValidationError(f"dimension mismatch: label {y} for K={K}")


def weighted_loss(y: int, pset: PredictionSet, w: WeightScheme) -> float:
    """``h(y)`` when ``y`` falls outside the set, else 0."""
    _check_label(y, w.K)
    _check_set(pset, w.K)
    return 0.0 if y in pset else float(w.weights[y])


def divergence_loss(y: int, pset: PredictionSet, K: int) -> float:
    """Distance from ``y`` to the interval, divided by ``K - 1``."""
    if K < 2:
        raise ValidationError("divergence loss needs K >= 2")
    _check_label(y, K)
    _check_set(pset, K)
    if y < pset.lower:
        return (pset.lower - y) / (K - 1)
    if y > pset.upper:
        return (y - pset.upper) / (K - 1)
    return 0.0


def set_loss(y: int, pset: PredictionSet, loss: LossSpec, K: int) -> float:
    if loss.is_weighted:
        return weighted_loss(y, pset, loss.weights)
    return divergence_loss(y, pset, K)


def interval_risk_weighted(scores: ScoreVector, w: WeightScheme, pset: PredictionSet) -> float:
    """Expected weighted loss of ``pset`` when the label is drawn from ``scores``.

    Equal to ``D(x) - sum_{i in [l,u]} h(i) p(i)``; summed over the excluded
    classes so the result is never negative.
    """
    if scores.K != w.K:
        raise ValidationError(f"dimension mismatch: {scores.K} scores, {w.K} weights")
    _check_set(pset, scores.K)
    s = w.weights * scores.probs
    return float(s[: pset.lower].sum() + s[pset.upper + 1 :].sum())


def interval_risk_divergence(scores: ScoreVector, pset: PredictionSet) -> float:
    K = scores.K
    if K < 2:
        raise ValidationError("divergence risk needs K >= 2")
    _check_set(pset, K)
    p = scores.probs
    idx = np.arange(K)
    left = np.sum((pset.lower - idx[: pset.lower]) * p[: pset.lower])
    right = np.sum((idx[pset.upper + 1 :] - pset.upper) * p[pset.upper + 1 :])
    return float((left + right) / (K - 1))


def interval_risk(scores: ScoreVector, pset: PredictionSet, loss: LossSpec) -> float:
    if loss.is_weighted:
        return interval_risk_weighted(scores, loss.weights, pset)
    return interval_risk_divergence(scores, pset)


def batch_losses(labels, lower, upper, loss: LossSpec, K: int) -> np.ndarray:
    """Vectorized loss for arrays of labels and interval bounds (broadcasting)."""
    labels = np.asarray(labels)
    lower = np.asarray(lower)
    upper = np.asarray(upper)
    below = labels < lower
    above = labels > upper
    if loss.is_weighted:
        h = loss.weights.weights[labels]
        return np.where(below | above, h, 0.0)
    if K < 2:
        raise ValidationError("divergence loss needs K >= 2")
    dist = np.where(below, lower - labels, np.where(above, labels - upper, 0))
    return dist / (K - 1)
