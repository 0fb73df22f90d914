"""Simulated ordinal data: ``K`` Gaussian classes in the plane.

Class ``i`` is centred at ``(i, i)`` with a random covariance
``A A^T + 0.25 I`` (``A`` has standard normal entries).  Scores are the
exact Bayes posteriors under equal class priors, optionally tempered to
emulate an over- or under-confident model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp
from scipy.stats import multivariate_normal

from .core import Dataset, ScoreVector, ValidationError

RIDGE = 0.25


@dataclass(frozen=True)
class GaussianClassSpec:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(2)
        cov = np.array(self.covariance, dtype=float).reshape(2, 2)
        if np.max(np.abs(cov - cov.T)) > 1e-12:
            raise ValidationError("covariance must be symmetric")
        if np.min(np.linalg.eigvalsh(cov)) <= 0:
            raise ValidationError("covariance must be positive definite")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)


def make_default_specs(K: int, seed: int) -> list[GaussianClassSpec]:
    if K < 2:
        raise ValidationError("need at least 2 classes")
    rng = np.random.default_rng(seed)
    specs = []
    for i in range(K):
        A = rng.standard_normal((2, 2))
        cov = A @ A.T + RIDGE * np.eye(2)
        specs.append(GaussianClassSpec(np.array([i, i], dtype=float), (cov + cov.T) / 2))
    return specs


def sample_dataset(specs, n_per_class: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n_per_class`` points from every class.

    Each class has its own child seed, so the draws of one class do not
    depend on how many classes come before it.
    """
    if n_per_class < 1:
        raise ValidationError("n_per_class must be >= 1")
    streams = np.random.SeedSequence(seed).spawn(len(specs))
    points, labels = [], []
    for i, (spec, ss) in enumerate(zip(specs, streams)):
        rng = np.random.default_rng(ss)
        points.append(rng.multivariate_normal(spec.mean, spec.covariance, size=n_per_class))
        labels.append(np.full(n_per_class, i, dtype=np.int64))
    return np.concatenate(points), np.concatenate(labels)


def bayes_posteriors(points, specs, temperature: float = 1.0) -> np.ndarray:
    """Posterior class probabilities for an ``(n, 2)`` array of points."""
    if temperature <= 0:
        raise ValidationError("temperature must be positive")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    logp = np.column_stack(
        [multivariate_normal(s.mean, s.covariance).logpdf(points) for s in specs]
    ).reshape(points.shape[0], len(specs))
    logp = logp / temperature
    return np.exp(logp - logsumexp(logp, axis=1, keepdims=True))


def bayes_posterior(point, specs, temperature: float = 1.0) -> ScoreVector:
    return ScoreVector(bayes_posteriors(point, specs, temperature)[0])


def simulate(K: int = 10, n_per_class: int = 2000, seed: int = 0, temperature: float = 1.0) -> Dataset:
    """Specs, samples and posterior scores in one call."""
    specs = make_default_specs(K, seed)
    points, labels = sample_dataset(specs, n_per_class, seed)
    return Dataset(bayes_posteriors(points, specs, temperature), labels)


def dirichlet_dataset(K: int, n: int, seed: int, concentration: float = 1.0) -> Dataset:
    """Scores drawn from a symmetric Dirichlet, labels drawn from the scores.

    The scores are calibrated by construction and far less confident than the
    Gaussian posteriors, so risks stay below saturation for moderate alpha.
    """
    if K < 2 or n < 1:
        raise ValidationError("need K >= 2 and n >= 1")
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.full(K, concentration), size=n)
    cum = np.cumsum(P, axis=1)
    u = rng.random(n)[:, None]
    labels = np.minimum(np.count_nonzero(cum < u, axis=1), K - 1)
    return Dataset(P, labels)
