"""Repeated calibration/test splits: realized risk, set sizes and centroids."""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .calibration import LossSurface, exact_lambda
from .core import InfeasibleError, LossSpec, Rows, ValidationError, as_dataset, check_alpha
from .sets import chain_table

SATURATION_TOL = 1e-4


@dataclass
class RiskReport:
    alpha: float
    mean_risk: float
    risk_per_trial: list[float]
    mean_set_size: float
    size_histogram: dict[int, int]
    centroid_histogram: dict[float, int]
    lambda_hat_per_trial: list[float]
    n_cal: int = 0
    n_test: int = 0
    size_per_trial: list[float] = field(default_factory=list)

    def __post_init__(self):
        if any(not 0.0 <= r <= 1.0 for r in self.risk_per_trial):
            raise ValidationError("per-trial risk outside [0, 1]")
        if abs(self.mean_risk - float(np.mean(self.risk_per_trial))) > 1e-12:
            raise ValidationError("mean_risk inconsistent with risk_per_trial")
        total = len(self.risk_per_trial) * self.n_test
        if self.n_test and sum(self.size_histogram.values()) != total:
            raise ValidationError("size histogram does not cover every test prediction")

    @property
    def trials(self) -> int:
        return len(self.risk_per_trial)

    @property
    def risk_se(self) -> float:
        if self.trials < 2:
            return 0.0
        return float(np.std(self.risk_per_trial, ddof=1) / math.sqrt(self.trials))

    def centroid_variance(self, center: float) -> float:
        return centroid_spread(self.centroid_histogram, center)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "mean_risk": self.mean_risk,
            "risk_se": self.risk_se,
            "mean_set_size": self.mean_set_size,
            "trials": self.trials,
            "n_cal": self.n_cal,
            "n_test": self.n_test,
            "risk_per_trial": list(self.risk_per_trial),
            "size_per_trial": list(self.size_per_trial),
            "lambda_hat_per_trial": list(self.lambda_hat_per_trial),
            "size_histogram": {str(k): v for k, v in sorted(self.size_histogram.items())},
            "centroid_histogram": {
                f"{k:g}": v for k, v in sorted(self.centroid_histogram.items())
            },
        }


def centroid_spread(hist: dict, center: float) -> float:
    """Mean squared distance of centroids from ``center``."""
    total = sum(hist.values())
    return sum(c * (k - center) ** 2 for k, c in hist.items()) / total


class TrialPlan:
    """Seeded calibration/test splits shared by every alpha in a sweep.

    Trial ``t`` shuffles with the generator seeded by ``(seed, t)``, so the
    splits do not depend on worker count or on which alphas are evaluated.
    """

    def __init__(self, rows: Rows, loss: LossSpec, trials: int = 100, split: float = 0.5, seed: int = 0):
        if trials < 1:
            raise ValidationError("trials must be >= 1")
        if not 0.0 < split < 1.0:
            raise ValidationError("split must lie in (0, 1)")
        data = as_dataset(rows)
        N = len(data)
        n_cal = int(round(split * N))
        if n_cal < 1 or N - n_cal < 1:
            raise ValidationError(f"too few rows ({N}) for a calibration/test split")
        self.data = data
        self.loss = loss
        self.K = data.K
        self.n_cal, self.n_test = n_cal, N - n_cal
        self.surface = LossSurface(chain_table(data.scores, loss), data.labels, loss)
        self.splits = []
        for t in range(trials):
            perm = np.random.default_rng([seed, t]).permutation(N)
            self.splits.append((perm[:n_cal], perm[n_cal:]))
        self._cal = [self.surface.subset(c) for c, _ in self.splits]

    @property
    def trials(self) -> int:
        return len(self.splits)

    def _one(self, t: int, alpha: float):
        lam = exact_lambda(self._cal[t], alpha)
        test = self.splits[t][1]
        table = self.surface.table
        j = table.index_at(lam)[test]
        losses = self.surface.step_losses[test, j]
        lo, hi = table.lower[test, j], table.upper[test, j]
        return lam, float(np.mean(losses)), hi - lo + 1, (lo + hi) / 2

    def run(self, alpha: float, threads: int | None = None) -> RiskReport:
        alpha = check_alpha(alpha)
        if threads and threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                out = list(pool.map(lambda t: self._one(t, alpha), range(self.trials)))
        else:
            out = [self._one(t, alpha) for t in range(self.trials)]
        lams = [o[0] for o in out]
        risks = [o[1] for o in out]
        widths = np.concatenate([o[2] for o in out])
        cents = np.concatenate([o[3] for o in out])
        return RiskReport(
            alpha=alpha,
            mean_risk=float(np.mean(risks)),
            risk_per_trial=risks,
            mean_set_size=float(np.mean(widths)),
            size_histogram={int(k): int(v) for k, v in zip(*np.unique(widths, return_counts=True))},
            centroid_histogram={float(k): int(v) for k, v in zip(*np.unique(cents, return_counts=True))},
            lambda_hat_per_trial=lams,
            n_cal=self.n_cal,
            n_test=self.n_test,
            size_per_trial=[float(np.mean(o[2])) for o in out],
        )

    @property
    def alpha_floor(self) -> float:
        """Smallest alpha whose calibration budget is nonnegative."""
        a = self.loss.bound_B / (self.n_cal + 1)
        while (self.n_cal + 1) * a - self.loss.bound_B < 0:
            a = float(np.nextafter(a, 1.0))
        return a


def run_trials(rows: Rows, alpha: float, loss: LossSpec, trials: int = 100, split: float = 0.5,
               seed: int = 0, threads: int | None = None) -> RiskReport:
    return TrialPlan(rows, loss, trials, split, seed).run(alpha, threads)


def sweep_alpha(rows: Rows, alphas, loss: LossSpec, trials: int = 100, split: float = 0.5,
                seed: int = 0, threads: int | None = None) -> list[RiskReport]:
    plan = rows if isinstance(rows, TrialPlan) else TrialPlan(rows, loss, trials, split, seed)
    return [plan.run(a, threads) for a in alphas]


def detect_saturation(reports: list[RiskReport], tol: float = SATURATION_TOL) -> float | None:
    """First alpha after which the mean risk stops moving (change below ``tol``)."""
    for a, b in zip(reports, reports[1:]):
        if abs(b.mean_risk - a.mean_risk) < tol:
            return a.alpha
    return None


def alpha_for_target_size(rows: Rows, loss: LossSpec, target_size: float, trials: int = 100,
                          seed: int = 0, tol: float = 0.05, split: float = 0.5,
                          max_iter: int = 60) -> float:
    """Bisect on alpha until the mean test set size is within ``tol`` of the target.

    Mean size is non-increasing in alpha because the splits are shared.
    Returns the closest alpha found when the size function jumps over the
    tolerance band.
    """
    plan = rows if isinstance(rows, TrialPlan) else TrialPlan(rows, loss, trials, split, seed)
    if not 1 <= target_size <= plan.K:
        raise ValidationError(f"target size must lie in [1, {plan.K}]")
    lo, hi = plan.alpha_floor, float(np.nextafter(1.0, 0.0))
    size_lo = plan.run(lo).mean_set_size
    size_hi = plan.run(hi).mean_set_size
    if target_size > size_lo + tol or target_size < size_hi - tol:
        raise InfeasibleError(
            f"target size {target_size} unreachable: sizes span [{size_hi:.4g}, {size_lo:.4g}]"
        )
    best = min([(abs(size_lo - target_size), lo), (abs(size_hi - target_size), hi)])
    if best[0] <= tol:
        return best[1]
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        size = plan.run(mid).mean_set_size
        best = min(best, (abs(size - target_size), mid))
        if abs(size - target_size) <= tol:
            return mid
        if size > target_size:
            lo = mid
        else:
            hi = mid
    return best[1]


def centroid_distribution(rows: Rows, loss: LossSpec, lam: float) -> Counter:
    """Histogram of set centroids ``(l + u) / 2`` at threshold ``lam``."""
    if not 0.0 <= lam <= 1.0:
        raise ValidationError("lambda must lie in [0, 1]")
    data = as_dataset(rows)
    lo, hi = chain_table(data.scores, loss).bounds_at(lam)
    return Counter(((lo + hi) / 2).tolist())
