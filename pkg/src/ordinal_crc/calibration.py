"""Choosing ``lambda_hat`` from calibration data.

Under the greedy constructions larger ``lam`` means smaller sets, so every
per-sample loss ``L_i(lam)`` is a non-decreasing step function that is 0 at
the full-range end.  The calibration rule keeps the largest ``lam`` with

    sum_i L_i(lam) <= (n + 1) * alpha - B.

Steps happen at chain thresholds and the loss takes its new value *at* the
threshold (sets are admitted with ``<=``), so the feasible region is
``[0, lam_star)`` for the first infeasible breakpoint ``lam_star``.  The exact
method returns the float immediately below ``lam_star``; every row gets the
same set there as anywhere in the last feasible segment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    CalibrationResult,
    InfeasibleError,
    LossSpec,
    Rows,
    ValidationError,
    as_dataset,
    check_alpha,
    risk_budget,
)
from .losses import batch_losses
from .sets import ChainTable, chain_table

COLLISION_TOL = 1e-12


@dataclass(frozen=True)
class SampleBreakpoints:
    """Canonical step function ``L_i(lam)``.

    The loss is 0 below ``thresholds[0]`` and equals ``losses[k]`` on
    ``[thresholds[k], thresholds[k+1])``.
    """

    thresholds: np.ndarray
    losses: np.ndarray

    def loss_at(self, lam: float) -> float:
        k = int(np.searchsorted(self.thresholds, lam, side="right"))
        return 0.0 if k == 0 else float(self.losses[k - 1])

    @property
    def jumps(self) -> np.ndarray:
        return np.diff(self.losses, prepend=0.0)

    def __len__(self):
        return len(self.thresholds)


def _canonical_breakpoints(thresholds: np.ndarray, step_losses: np.ndarray) -> SampleBreakpoints:
    # Walk the chain from the full range (last step) back to the singleton.
    T = thresholds[:-1][::-1]
    L = step_losses[:-1][::-1]
    # Several steps admitted at the same lam: the smallest set wins.
    last = np.append(T[1:] != T[:-1], True) if len(T) else np.zeros(0, bool)
    T, L = T[last], L[last]
    prev = np.concatenate([[step_losses[-1]], L[:-1]])
    keep = L != prev
    return SampleBreakpoints(T[keep].copy(), L[keep].copy())


class LossSurface:
    """Per-step losses of the greedy chains of a labelled dataset."""

    def __init__(self, table: ChainTable, labels: np.ndarray, loss: LossSpec):
        self.table = table
        self.labels = np.asarray(labels)
        self.loss = loss
        self.step_losses = batch_losses(
            self.labels[:, None], table.lower, table.upper, loss, table.K
        )

    @classmethod
    def from_rows(cls, rows: Rows, loss: LossSpec) -> "LossSurface":
        data = as_dataset(rows)
        return cls(chain_table(data.scores, loss), data.labels, loss)

    def __len__(self):
        return len(self.table)

    def subset(self, idx) -> "LossSurface":
        out = object.__new__(LossSurface)
        out.table = self.table.subset(idx)
        out.labels = self.labels[idx]
        out.loss = self.loss
        out.step_losses = self.step_losses[idx]
        return out

    def losses_at(self, lam: float) -> np.ndarray:
        j = self.table.index_at(lam)
        return self.step_losses[np.arange(len(j)), j]

    def total(self, lam: float) -> float:
        return math.fsum(self.losses_at(lam))

    def breakpoints(self, i: int) -> SampleBreakpoints:
        return _canonical_breakpoints(self.table.thresholds[i], self.step_losses[i])

    def candidate_thresholds(self) -> np.ndarray:
        T = self.table.thresholds[:, :-1].ravel()
        return np.unique(T[(T > 0.0) & (T <= 1.0)])


def sample_breakpoints(row, loss: LossSpec) -> SampleBreakpoints:
    return LossSurface.from_rows([row], loss).breakpoints(0)


def _start(surface: LossSurface, alpha: float) -> float:
    n = len(surface)
    if n < 1:
        raise ValidationError("calibration needs at least one row")
    budget = risk_budget(n, alpha, surface.loss.bound_B)
    if budget < 0:
        raise InfeasibleError(
            f"infeasible: alpha below B/(n+1) = {surface.loss.bound_B / (n + 1):.6g}"
        )
    if surface.total(0.0) > budget:
        raise InfeasibleError("infeasible: loss budget exceeded even at lambda = 0")
    return budget


def exact_lambda(surface: LossSurface, alpha: float) -> float:
    budget = _start(surface, alpha)
    vals = surface.candidate_thresholds()
    lo, hi = 0, len(vals)
    # first breakpoint whose total loss exceeds the budget
    while lo < hi:
        mid = (lo + hi) // 2
        if surface.total(vals[mid]) > budget:
            hi = mid
        else:
            lo = mid + 1
    if lo == len(vals):
        return 1.0
    return float(np.nextafter(vals[lo], -np.inf))


def binary_lambda(surface: LossSurface, alpha: float, delta: float) -> float:
    """Bisection from ``lam = 0.5``, halving the step until it is at most ``delta``.

    The final iterate is not evaluated by the bisection itself; when it is
    infeasible the left end of the final bracket (0 or a point already found
    feasible) is returned instead.
    """
    if not delta > 0:
        raise ValidationError("delta must be positive")
    budget = _start(surface, alpha)
    lam, step = 0.5, 0.5
    while step > delta:
        if surface.total(lam) > budget:
            lam -= step / 2
        else:
            lam += step / 2
        step /= 2
    if surface.total(lam) > budget:
        lam -= step
    return lam


def _result(surface, lam, alpha, method, delta=None) -> CalibrationResult:
    return CalibrationResult(
        lambda_hat=lam,
        alpha=alpha,
        n=len(surface),
        method=method,
        loss=surface.loss,
        empirical_sum=surface.total(lam),
        delta=delta,
    )


def calibrate_exact(rows: Rows, alpha: float, loss: LossSpec) -> CalibrationResult:
    alpha = check_alpha(alpha)
    surface = rows if isinstance(rows, LossSurface) else LossSurface.from_rows(rows, loss)
    return _result(surface, exact_lambda(surface, alpha), alpha, "exact")


def calibrate_binary(rows: Rows, alpha: float, loss: LossSpec, delta: float = 1e-4) -> CalibrationResult:
    alpha = check_alpha(alpha)
    surface = rows if isinstance(rows, LossSurface) else LossSurface.from_rows(rows, loss)
    return _result(surface, binary_lambda(surface, alpha, delta), alpha, "binary", delta)


@dataclass(frozen=True)
class JumpDiagnostics:
    max_collision_M: int
    max_empirical_jump: float
    n: int
    bound_B: float = 1.0

    @property
    def lemma_bound(self) -> float:
        return (self.max_collision_M + 1) * self.bound_B / self.n

    def __post_init__(self):
        if self.max_empirical_jump > self.lemma_bound + 1e-12:
            raise ValidationError("empirical jump exceeds (M+1)B/n")


def jump_diagnostics(rows: Rows, loss: LossSpec) -> JumpDiagnostics:
    """Largest number of samples whose loss jumps at a common ``lam``, and the
    largest jump of the empirical risk ``(1/n) sum_i L_i``."""
    surface = rows if isinstance(rows, LossSurface) else LossSurface.from_rows(rows, loss)
    n = len(surface)
    if n < 1:
        raise ValidationError("need at least one row")
    ts, ids, js = [], [], []
    for i in range(n):
        bp = surface.breakpoints(i)
        ts.append(bp.thresholds)
        js.append(bp.jumps)
        ids.append(np.full(len(bp), i))
    t = np.concatenate(ts)
    if t.size == 0:
        return JumpDiagnostics(0, 0.0, n, surface.loss.bound_B)
    sample = np.concatenate(ids)
    jump = np.concatenate(js)
    order = np.argsort(t, kind="stable")
    t, sample, jump = t[order], sample[order], jump[order]
    group = np.concatenate([[0], np.cumsum(np.diff(t) > COLLISION_TOL)])
    starts = np.flatnonzero(np.diff(group, prepend=-1))
    biggest = float(np.max(np.add.reduceat(jump, starts))) / n
    pairs = np.unique(np.stack([group, sample]), axis=1)
    M = int(np.bincount(pairs[0]).max())
    return JumpDiagnostics(M, biggest, n, surface.loss.bound_B)
