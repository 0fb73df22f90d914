from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ordinal_crc import (
    Dataset,
    InfeasibleError,
    LossSpec,
    PredictionSet,
    ScoreVector,
    ValidationError,
    WeightScheme,
    calibrate_exact,
)
from ordinal_crc.oracles import (
    calibrate_grid,
    chain_width_at,
    enumerate_chains,
    verify_non_domination,
)
from ordinal_crc.sets import greedy_chain

from .conftest import loss_specs, score_vectors

EQ5 = LossSpec.weighted(WeightScheme.equal(5))


def test_enumerate_small():
    fam = enumerate_chains(3, 1)
    P = PredictionSet
    assert set(fam.chains) == {
        (P(1, 1), P(0, 1), P(0, 2)),
        (P(1, 1), P(1, 2), P(0, 2)),
    }


@pytest.mark.parametrize("K,yhat", [(5, 0), (5, 2), (6, 5), (8, 3), (1, 0)])
def test_enumerate_counts(K, yhat):
    fam = enumerate_chains(K, yhat)
    assert len(fam) == comb(K - 1, yhat)
    assert len(set(fam.chains)) == len(fam)
    for chain in fam.chains:
        assert chain[0] == PredictionSet(yhat, yhat)
        assert chain[-1] == PredictionSet(0, K - 1)
        for a, b in zip(chain, chain[1:]):
            assert a.issubset(b) and b.width() == a.width() + 1


def test_enumerate_rejects():
    with pytest.raises(ValidationError):
        enumerate_chains(13, 0)
    with pytest.raises(ValidationError):
        enumerate_chains(4, 4)


def test_chain_width_at(bump):
    g = greedy_chain(bump, EQ5).steps
    assert [chain_width_at(g, bump, EQ5, x) for x in (0.0, 0.15, 0.35, 0.6, 1.0)] == [5, 4, 3, 1, 1]


def test_non_domination_examples():
    # widening the side with more mass first matters here
    assert verify_non_domination(ScoreVector([0.05, 0.3, 0.4, 0.04, 0.21]), EQ5)
    # only one chain grows from class 0
    assert verify_non_domination(ScoreVector([0.5, 0.05, 0.3, 0.06, 0.09]), EQ5)
    assert verify_non_domination(ScoreVector([1.0]), LossSpec.divergence())


def test_exact_tie_can_be_dominated():
    # s(1) == s(3): the upward tie-break loses to [0, 2] at width 3
    assert not verify_non_domination(ScoreVector([0.25, 0.15, 0.4, 0.15, 0.05]), EQ5)


def test_non_domination_limit():
    with pytest.raises(ValidationError):
        verify_non_domination(ScoreVector(np.full(9, 1 / 9)), EQ5, max_K=8)


@settings(max_examples=200, deadline=None)
@given(score_vectors(max_K=8), st.data())
def test_greedy_not_dominated(sv, data):
    loss = data.draw(loss_specs(sv.K))
    s = sv.probs * loss.weights.weights if loss.is_weighted else sv.probs
    if len(np.unique(s)) < sv.K:
        return  # exact ties are handled by the fixed tie-break policy
    assert verify_non_domination(sv, loss)


def test_grid_examples():
    bump = [0.1, 0.2, 0.4, 0.2, 0.1]
    data = Dataset(np.array([bump] * 4), [1] * 4)
    assert calibrate_grid(data, 0.5, EQ5, grid_step=1e-4) == pytest.approx(0.3999, abs=1e-12)
    zero = Dataset(np.array([bump] * 4), [2] * 4)
    assert calibrate_grid(zero, 0.3, EQ5) == 1.0
    with pytest.raises(InfeasibleError):
        calibrate_grid(Dataset(np.array([bump]), [0]), 0.4, EQ5)
    with pytest.raises(ValidationError):
        calibrate_grid(data, 0.5, EQ5, grid_step=0)


@pytest.mark.parametrize("seed", range(5))
def test_grid_agrees_with_exact(seed):
    rng = np.random.default_rng(seed)
    K = 6
    P = rng.dirichlet(np.ones(K), size=100)
    data = Dataset(P, [rng.choice(K, p=p) for p in P])
    for loss in (LossSpec.divergence(), LossSpec.weighted(WeightScheme.linear(K))):
        ex = calibrate_exact(data, 0.15, loss).lambda_hat
        gr = calibrate_grid(data, 0.15, loss)
        assert gr <= ex and ex - gr <= 1e-4
