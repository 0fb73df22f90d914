"""Brute-force references for validating the greedy sets and the calibration.

Nothing here is used on the production path.  Greedy optimality is checked
as *non-domination*: among all nested chains growing one class per step from
the point prediction, none is at least as narrow at every ``lam`` and
strictly narrower at some ``lam``.  Pointwise minimal width at every ``lam``
is not attainable by a single nested family in general.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .core import (
    InfeasibleError,
    LossSpec,
    PredictionSet,
    Rows,
    ScoreVector,
    ValidationError,
    as_dataset,
    check_alpha,
    risk_budget,
)
from .losses import batch_losses, interval_risk_divergence
from .sets import chain_table, greedy_chain, point_prediction

MAX_ENUM_K = 12


@dataclass(frozen=True)
class NestedChainFamily:
    K: int
    yhat: int
    chains: tuple[tuple[PredictionSet, ...], ...]

    def __len__(self):
        return len(self.chains)


def enumerate_chains(K: int, yhat: int) -> NestedChainFamily:
    """All chains from ``[yhat, yhat]`` to ``[0, K-1]``, one endpoint per step."""
    if K > MAX_ENUM_K:
        raise ValidationError(f"K={K} too large to enumerate (max {MAX_ENUM_K})")
    if not 0 <= yhat < K:
        raise ValidationError("yhat out of range")
    chains = []
    for down_steps in combinations(range(K - 1), yhat):
        down = set(down_steps)
        l = u = yhat
        chain = [PredictionSet(l, u)]
        for step in range(K - 1):
            if step in down:
                l -= 1
            else:
                u += 1
            chain.append(PredictionSet(l, u))
        chains.append(tuple(chain))
    return NestedChainFamily(K, yhat, tuple(chains))


def _set_threshold(pset: PredictionSet, scores: ScoreVector, loss: LossSpec) -> float:
    if loss.is_weighted:
        s = loss.weights.weights * scores.probs
        return 1.0 - math.fsum(s[pset.lower : pset.upper + 1])
    return interval_risk_divergence(scores, pset)


def chain_thresholds(chain, scores: ScoreVector, loss: LossSpec) -> np.ndarray:
    return np.array([_set_threshold(s, scores, loss) for s in chain])


def chain_width_at(chain, scores: ScoreVector, loss: LossSpec, lam: float) -> int:
    """Width of the first chain element admissible at ``lam``; full range if none."""
    for pset in chain:
        if _set_threshold(pset, scores, loss) <= lam:
            return pset.width()
    return chain[-1].width()


def _widths(thresholds: np.ndarray, grid: np.ndarray) -> np.ndarray:
    K = thresholds.shape[-1]
    j = np.count_nonzero(thresholds[..., None, :] > grid[:, None], axis=-1)
    return np.minimum(j, K - 1) + 1


def verify_non_domination(scores: ScoreVector, loss: LossSpec, max_K: int = 8) -> bool:
    """True iff no enumerated chain weakly beats the greedy chain everywhere
    while strictly beating it somewhere.

    Every chain, the greedy one included, is scored with the same interval
    formula so identical sets get bit-identical thresholds.
    """
    K = scores.K
    if K > max_K:
        raise ValidationError(f"K={K} above the non-domination limit {max_K}")
    if K <= 1:
        return True
    greedy = greedy_chain(scores, loss).steps
    family = enumerate_chains(K, point_prediction(scores, loss))
    T = np.array([chain_thresholds(c, scores, loss) for c in family.chains])
    grid = np.unique(np.concatenate([[0.0, 1.0], T.ravel()]))
    grid = grid[(grid >= 0.0) & (grid <= 1.0)]
    W = _widths(T, grid)
    g = W[family.chains.index(greedy)]
    dominated = np.all(W <= g, axis=1) & np.any(W < g, axis=1)
    return not bool(np.any(dominated))


def calibrate_grid(rows: Rows, alpha: float, loss: LossSpec, grid_step: float = 1e-4) -> float:
    """Largest ``lam`` on a uniform grid over ``[0, 1]`` meeting the calibration
    condition, by direct evaluation at every grid point."""
    if not grid_step > 0:
        raise ValidationError("grid_step must be positive")
    alpha = check_alpha(alpha)
    data = as_dataset(rows)
    n = len(data)
    budget = risk_budget(n, alpha, loss.bound_B)
    if budget < 0:
        raise InfeasibleError("infeasible: alpha below B/(n+1)")
    table = chain_table(data.scores, loss)
    grid = np.linspace(0.0, 1.0, int(round(1.0 / grid_step)) + 1)
    # count(thresholds > g) per row, via a sorted copy of each row
    K = data.K
    j = np.empty((n, grid.size), dtype=np.int64)
    for i, row in enumerate(np.sort(table.thresholds, axis=1)):
        j[i] = K - np.searchsorted(row, grid, side="right")
    j = np.minimum(j, K - 1)
    rows_idx = np.arange(n)[:, None]
    L = batch_losses(data.labels[:, None], table.lower[rows_idx, j], table.upper[rows_idx, j], loss, K)
    feasible = np.array([math.fsum(col) <= budget for col in L.T])
    if not feasible.any():
        raise InfeasibleError("infeasible: no grid point meets the calibration condition")
    return float(grid[np.flatnonzero(feasible)[-1]])
