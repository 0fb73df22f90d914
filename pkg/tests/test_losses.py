import itertools

import numpy as np
import pytest
from hypothesis import given, settings

from ordinal_crc import (
    LossSpec,
    PredictionSet,
    ScoreVector,
    ValidationError,
    WeightScheme,
    divergence_loss,
    interval_risk_divergence,
    interval_risk_weighted,
    weighted_loss,
)
from ordinal_crc.losses import batch_losses, interval_risk, set_loss

from .conftest import loss_specs, score_vectors


def all_intervals(K):
    return [PredictionSet(l, u) for l in range(K) for u in range(l, K)]


def table_weighted(y, pset, w):
    """Loss table oracle: enumerate the set membership explicitly."""
    return 0.0 if y in set(range(pset.lower, pset.upper + 1)) else w[y]


def table_divergence(y, pset, K):
    return min(abs(y - k) for k in range(pset.lower, pset.upper + 1)) / (K - 1)


def test_weighted_loss_examples(linear5, equal5):
    assert weighted_loss(2, PredictionSet(1, 3), linear5) == 0.0
    assert weighted_loss(4, PredictionSet(0, 2), linear5) == table_weighted(4, PredictionSet(0, 2), linear5.weights) == 1.0
    assert weighted_loss(0, PredictionSet(1, 4), equal5) == 1.0


def test_weighted_loss_matches_table(linear5):
    for pset in all_intervals(5):
        for y in range(5):
            assert weighted_loss(y, pset, linear5) == table_weighted(y, pset, linear5.weights)


def test_weighted_loss_dimension_mismatch(equal5):
    with pytest.raises(ValidationError, match="dimension mismatch"):
        weighted_loss(5, PredictionSet(0, 1), equal5)
    with pytest.raises(ValidationError, match="dimension mismatch"):
        weighted_loss(0, PredictionSet(0, 5), equal5)


def test_divergence_loss_examples():
    assert divergence_loss(2, PredictionSet(1, 3), 5) == 0.0
    assert divergence_loss(0, PredictionSet(3, 4), 5) == pytest.approx(3 / 4)
    assert divergence_loss(4, PredictionSet(0, 0), 5) == 1.0
    with pytest.raises(ValidationError):
        divergence_loss(0, PredictionSet(0, 0), 1)


def test_divergence_loss_matches_table():
    for K in range(2, 8):
        for pset in all_intervals(K):
            for y in range(K):
                assert divergence_loss(y, pset, K) == pytest.approx(table_divergence(y, pset, K), abs=1e-15)


def test_interval_risk_weighted_examples(bump, equal5, linear5):
    assert interval_risk_weighted(bump, equal5, PredictionSet(0, 4)) == 0.0
    assert interval_risk_weighted(bump, equal5, PredictionSet(2, 2)) == pytest.approx(0.6)
    assert interval_risk_weighted(bump, linear5, PredictionSet(2, 4)) == pytest.approx(0.05)


def test_interval_risk_divergence_examples(bump):
    assert interval_risk_divergence(bump, PredictionSet(0, 4)) == 0.0
    assert interval_risk_divergence(bump, PredictionSet(2, 2)) == pytest.approx(0.2)
    assert interval_risk_divergence(bump, PredictionSet(1, 3)) == pytest.approx(0.05)


def test_interval_risk_dimension_mismatch(bump):
    with pytest.raises(ValidationError):
        interval_risk_weighted(bump, WeightScheme.equal(4), PredictionSet(0, 1))


def test_monotone_under_enlargement_exhaustive():
    for K in range(2, 9):
        w = WeightScheme(np.arange(1, K + 1))
        sets = all_intervals(K)
        for a, b in itertools.product(sets, sets):
            if not a.issubset(b):
                continue
            for y in range(K):
                assert weighted_loss(y, b, w) <= weighted_loss(y, a, w)
                assert divergence_loss(y, b, K) <= divergence_loss(y, a, K)


@given(score_vectors())
def test_risk_is_expected_loss(sv):
    K = sv.K
    rng = np.random.default_rng(K)
    w = WeightScheme(rng.uniform(0.1, 1, K))
    for pset in all_intervals(K):
        exp_w = sum(sv.probs[y] * weighted_loss(y, pset, w) for y in range(K))
        exp_d = sum(sv.probs[y] * divergence_loss(y, pset, K) for y in range(K))
        rw = interval_risk_weighted(sv, w, pset)
        rd = interval_risk_divergence(sv, pset)
        assert abs(rw - exp_w) <= 1e-12 and abs(rd - exp_d) <= 1e-12
        assert 0.0 <= rw <= 1.0 and 0.0 <= rd <= 1.0


@given(score_vectors(min_K=2, max_K=10))
def test_boundary_adjustment_identities(sv):
    K, p = sv.K, sv.probs
    R = lambda l, u: interval_risk_divergence(sv, PredictionSet(l, u))
    for l in range(K):
        for u in range(l, K):
            if l + 1 <= u:
                assert (K - 1) * (R(l + 1, u) - R(l, u)) == pytest.approx(p[: l + 1].sum(), abs=1e-12)
            if u - 1 >= l:
                assert (K - 1) * (R(l, u - 1) - R(l, u)) == pytest.approx(p[u:].sum(), abs=1e-12)


@settings(max_examples=50)
@given(score_vectors())
def test_batch_matches_scalar(sv):
    K = sv.K
    for loss in (LossSpec.divergence(), LossSpec.weighted(WeightScheme.linear(K))):
        sets = all_intervals(K)
        lo = np.array([s.lower for s in sets])
        hi = np.array([s.upper for s in sets])
        for y in range(K):
            got = batch_losses(np.full(len(sets), y), lo, hi, loss, K)
            want = [set_loss(y, s, loss, K) for s in sets]
            assert np.allclose(got, want, rtol=0, atol=1e-15)
        assert interval_risk(sv, sets[0], loss) >= 0
