"""Domain types shared across the package.

Classes are always the integers ``0..K-1``.  ``K`` is inferred from the
score vectors and never configured separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

# Softmax exports lose precision in CSV round-trips; within this distance of
# summing to one a score vector is renormalized, beyond it it is rejected.
RENORMALIZE_TOL = 1e-4


class OrdinalCRCError(ValueError):
    """Base class for errors raised by this package."""


class ValidationError(OrdinalCRCError):
    pass


class InfeasibleError(OrdinalCRCError):
    """The requested risk level cannot be met, even by full-range sets."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _check_prob_matrix(probs: np.ndarray) -> np.ndarray:
    """Validate a (n, K) matrix of score rows and renormalize them."""
    if probs.ndim != 2 or probs.shape[1] < 1:
        raise ValidationError("invalid score: expected a non-empty probability vector")
    if not np.all(np.isfinite(probs)):
        raise ValidationError("invalid score: non-finite entry")
    if np.any(probs < 0):
        raise ValidationError("invalid score: negative probability")
    sums = probs.sum(axis=1)
    bad = np.abs(sums - 1.0) > RENORMALIZE_TOL
    if np.any(bad):
        i = int(np.argmax(bad))
        raise ValidationError(f"invalid score: row {i} sums to {sums[i]:.6g}")
    # rows already summing to 1 up to rounding are kept bit-for-bit
    off = np.abs(sums - 1.0) > 1e-12
    if np.any(off):
        probs = probs.copy()
        probs[off] /= sums[off, None]
    return probs


@dataclass(frozen=True, eq=False)
class ScoreVector:
    """Class-probability vector over ``K`` ordered classes."""

    probs: np.ndarray

    def __post_init__(self):
        arr = np.array(self.probs, dtype=float).reshape(1, -1)
        arr = _check_prob_matrix(arr)[0]
        object.__setattr__(self, "probs", _frozen(arr))

    @property
    def K(self) -> int:
        return self.probs.shape[0]

    def __len__(self):
        return self.K

    def __getitem__(self, i):
        return self.probs[i]

    def __eq__(self, other):
        return isinstance(other, ScoreVector) and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(self.probs.tobytes())


@dataclass(frozen=True, order=True)
class PredictionSet:
    """Contiguous class interval ``{lower, ..., upper}``."""

    lower: int
    upper: int

    def __post_init__(self):
        lo, hi = int(self.lower), int(self.upper)
        if lo < 0 or hi < lo:
            raise ValidationError(f"invalid prediction set [{lo}, {hi}]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def width(self) -> int:
        return self.upper - self.lower + 1

    @property
    def centroid(self) -> float:
        return (self.lower + self.upper) / 2

    def __contains__(self, y) -> bool:
        return self.lower <= y <= self.upper

    def issubset(self, other: "PredictionSet") -> bool:
        return other.lower <= self.lower and self.upper <= other.upper

    def __iter__(self):
        return iter(range(self.lower, self.upper + 1))

    def __repr__(self):
        return f"PredictionSet[{self.lower}, {self.upper}]"


@dataclass(frozen=True, eq=False)
class WeightScheme:
    """Per-class weights ``h(i)``, max-normalized to 1 at construction."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        if w.size == 0 or not np.all(np.isfinite(w)):
            raise ValidationError("weights must be a non-empty finite sequence")
        if np.any(w < 0):
            raise ValidationError("weights must be nonnegative")
        top = w.max()
        if top <= 0:
            raise ValidationError("at least one weight must be positive")
        object.__setattr__(self, "weights", _frozen(w / top))

    @property
    def K(self) -> int:
        return self.weights.shape[0]

    def __eq__(self, other):
        return isinstance(other, WeightScheme) and np.array_equal(self.weights, other.weights)

    def __hash__(self):
        return hash(self.weights.tobytes())

    @classmethod
    def equal(cls, K: int) -> "WeightScheme":
        return cls(np.ones(K))

    @classmethod
    def linear(cls, K: int) -> "WeightScheme":
        """``h(i) = i``; note ``h(0) = 0`` so class 0 is never penalized."""
        if K < 2:
            raise ValidationError("linear weights need K >= 2")
        return cls(np.arange(K, dtype=float))

    @classmethod
    def doubled(cls, K: int, classes: Iterable[int]) -> "WeightScheme":
        w = np.ones(K)
        w[list(classes)] = 2.0
        return cls(w)

    @classmethod
    def from_file(cls, path) -> "WeightScheme":
        lines = Path(path).read_text(encoding="utf-8").split()
        return cls([float(tok) for tok in lines])


WEIGHTED = "weighted"
DIVERGENCE = "divergence"


@dataclass(frozen=True)
class LossSpec:
    """Either the weight-based loss (with ``weights``) or the divergence loss.

    Both families are normalized to ``[0, 1]`` so ``bound_B`` is 1.
    """

    kind: str
    weights: WeightScheme | None = None
    bound_B: float = 1.0

    def __post_init__(self):
        if self.kind not in (WEIGHTED, DIVERGENCE):
            raise ValidationError(f"unknown loss kind {self.kind!r}")
        if self.kind == WEIGHTED and self.weights is None:
            raise ValidationError("weighted loss needs a WeightScheme")
        if self.kind == DIVERGENCE and self.weights is not None:
            raise ValidationError("divergence loss takes no weights")
        if self.bound_B != 1.0:
            raise ValidationError("bound_B is fixed at 1 for normalized losses")

    @classmethod
    def weighted(cls, weights: WeightScheme) -> "LossSpec":
        return cls(WEIGHTED, weights)

    @classmethod
    def divergence(cls) -> "LossSpec":
        return cls(DIVERGENCE)

    @property
    def is_weighted(self) -> bool:
        return self.kind == WEIGHTED

    def check_K(self, K: int) -> None:
        if self.is_weighted and self.weights.K != K:
            raise ValidationError(
                f"dimension mismatch: {self.weights.K} weights for {K} classes"
            )

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "bound_B": self.bound_B}
        if self.is_weighted:
            d["weights"] = self.weights.weights.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LossSpec":
        if d["kind"] == WEIGHTED:
            return cls.weighted(WeightScheme(d["weights"]))
        return cls.divergence()


@dataclass(frozen=True)
class LabeledScore:
    scores: ScoreVector
    label: int

    def __post_init__(self):
        if not isinstance(self.scores, ScoreVector):
            object.__setattr__(self, "scores", ScoreVector(self.scores))
        y = int(self.label)
        if not 0 <= y < self.scores.K:
            raise ValidationError(f"label out of range: {y} not in [0, {self.scores.K - 1}]")
        object.__setattr__(self, "label", y)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Columnar form of a sequence of :class:`LabeledScore` rows."""

    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        P = np.array(self.scores, dtype=float)
        if P.ndim != 2:
            raise ValidationError("inconsistent class count")
        if P.shape[0] == 0:
            raise ValidationError("empty dataset")
        P = _check_prob_matrix(P)
        y = np.array(self.labels)
        if y.shape != (P.shape[0],):
            raise ValidationError("one label per score row required")
        if not np.issubdtype(y.dtype, np.integer):
            if not np.all(np.mod(y, 1) == 0):
                raise ValidationError("labels must be integers")
        y = y.astype(np.int64)
        if np.any(y < 0) or np.any(y >= P.shape[1]):
            raise ValidationError(f"label out of range for K={P.shape[1]}")
        object.__setattr__(self, "scores", _frozen(P))
        object.__setattr__(self, "labels", _frozen(y))

    @property
    def K(self) -> int:
        return self.scores.shape[1]

    def __len__(self):
        return self.scores.shape[0]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.scores[idx], self.labels[idx])

    def rows(self) -> list[LabeledScore]:
        return [LabeledScore(ScoreVector(p), int(y)) for p, y in zip(self.scores, self.labels)]

    @classmethod
    def from_rows(cls, rows: Sequence[LabeledScore]) -> "Dataset":
        rows = list(rows)
        if not rows:
            raise ValidationError("empty dataset")
        Ks = {r.scores.K for r in rows}
        if len(Ks) != 1:
            raise ValidationError(f"inconsistent class count: {sorted(Ks)}")
        return cls(np.stack([r.scores.probs for r in rows]), np.array([r.label for r in rows]))


Rows = Union[Dataset, Sequence[LabeledScore]]


def as_dataset(rows: Rows) -> Dataset:
    if isinstance(rows, Dataset):
        return rows
    return Dataset.from_rows(rows)


def validate_dataset(rows: Rows) -> int:
    """Validate every row and return the common class count ``K``."""
    if isinstance(rows, Dataset):
        return rows.K
    rows = list(rows)
    if not rows:
        raise ValidationError("empty dataset")
    K = None
    for r in rows:
        if not isinstance(r, LabeledScore):
            r = LabeledScore(*r)
        if K is None:
            K = r.scores.K
        elif r.scores.K != K:
            raise ValidationError(f"inconsistent class count: {K} vs {r.scores.K}")
    return K


@dataclass(frozen=True)
class CalibrationResult:
    lambda_hat: float
    alpha: float
    n: int
    method: str
    loss: LossSpec
    empirical_sum: float
    delta: float | None = None
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not 0.0 <= self.lambda_hat <= 1.0:
            raise ValidationError(f"lambda_hat {self.lambda_hat} outside [0, 1]")
        if self.empirical_sum > risk_budget(self.n, self.alpha, self.loss.bound_B):
            raise ValidationError("calibration result violates its feasibility condition")

    @property
    def budget(self) -> float:
        return risk_budget(self.n, self.alpha, self.loss.bound_B)


def risk_budget(n: int, alpha: float, bound: float = 1.0) -> float:
    """Right-hand side ``(n+1)*alpha - B`` of the calibration condition."""
    return (n + 1) * alpha - bound


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (0.0 < alpha < 1.0) or math.isnan(alpha):
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha
