import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ordinal_crc import (
    CalibrationResult,
    Dataset,
    LabeledScore,
    LossSpec,
    PredictionSet,
    ScoreVector,
    ValidationError,
    WeightScheme,
    validate_dataset,
)
from ordinal_crc.core import as_dataset, risk_budget


def test_validate_dataset_infers_K():
    p = [0.1, 0.2, 0.4, 0.2, 0.1]
    rows = [LabeledScore(ScoreVector(p), y) for y in (0, 2, 4)]
    assert validate_dataset(rows) == 5


def test_validate_dataset_inconsistent_K():
    rows = [LabeledScore(ScoreVector([0.2] * 5), 0), LabeledScore(ScoreVector([1 / 6] * 6), 0)]
    with pytest.raises(ValidationError, match="inconsistent class count"):
        validate_dataset(rows)
    with pytest.raises(ValidationError, match="inconsistent class count"):
        Dataset.from_rows(rows)


def test_negative_probability_rejected():
    with pytest.raises(ValidationError, match="invalid score"):
        ScoreVector([-0.1, 0.6, 0.5])


def test_label_out_of_range():
    with pytest.raises(ValidationError, match="label out of range"):
        LabeledScore(ScoreVector([0.5, 0.5]), 2)
    with pytest.raises(ValidationError, match="label out of range"):
        Dataset(np.full((2, 3), 1 / 3), [0, 3])


def test_empty_dataset():
    with pytest.raises(ValidationError):
        validate_dataset([])


def test_small_drift_renormalized_large_rejected():
    sv = ScoreVector([0.25, 0.25, 0.25, 0.25 + 5e-5])
    assert abs(sv.probs.sum() - 1) < 1e-12
    with pytest.raises(ValidationError, match="invalid score"):
        ScoreVector([0.25, 0.25, 0.25, 0.26])


def test_exact_vectors_kept_bitwise():
    p = np.array([0.1, 0.2, 0.4, 0.2, 0.1])
    assert np.array_equal(ScoreVector(p).probs, p)


def test_types_are_immutable():
    sv = ScoreVector([0.5, 0.5])
    with pytest.raises(ValueError):
        sv.probs[0] = 1.0
    d = Dataset(np.full((2, 2), 0.5), [0, 1])
    with pytest.raises(ValueError):
        d.scores[0, 0] = 0.0


def test_dataset_does_not_freeze_caller_array():
    P = np.full((2, 2), 0.5)
    Dataset(P, [0, 1])
    P[0, 0] = 0.5  # still writeable


def test_prediction_set():
    s = PredictionSet(1, 3)
    assert s.width() == 3 and 2 in s and 4 not in s
    assert list(s) == [1, 2, 3]
    assert PredictionSet(2, 2).issubset(s)
    with pytest.raises(ValidationError):
        PredictionSet(3, 1)


def test_weight_scheme_normalized():
    w = WeightScheme([0, 1, 2, 4])
    assert w.weights.max() == 1.0
    assert np.allclose(w.weights, [0, 0.25, 0.5, 1])
    assert np.allclose(WeightScheme.linear(5).weights, [0, 0.25, 0.5, 0.75, 1])
    assert np.allclose(WeightScheme.doubled(4, [2, 3]).weights, [0.5, 0.5, 1, 1])
    with pytest.raises(ValidationError):
        WeightScheme([0, 0])
    with pytest.raises(ValidationError):
        WeightScheme([1, -1])


@given(st.lists(st.floats(0, 1e6), min_size=1, max_size=12).filter(lambda w: max(w) > 0))
def test_weight_normalization_idempotent(w):
    once = WeightScheme(w)
    twice = WeightScheme(once.weights)
    assert np.array_equal(once.weights, twice.weights)


def test_weights_from_file(tmp_path):
    f = tmp_path / "w.txt"
    f.write_text("1\n1\n2\n2\n")
    assert np.allclose(WeightScheme.from_file(f).weights, [0.5, 0.5, 1, 1])


def test_loss_spec():
    assert LossSpec.divergence().bound_B == 1.0
    assert LossSpec.weighted(WeightScheme.equal(3)).bound_B == 1.0
    with pytest.raises(ValidationError):
        LossSpec("weighted")
    with pytest.raises(ValidationError):
        LossSpec("divergence", bound_B=2.0)
    spec = LossSpec.weighted(WeightScheme.linear(4))
    assert LossSpec.from_dict(spec.to_dict()) == spec


def test_calibration_result_feasibility_invariant():
    loss = LossSpec.divergence()
    ok = CalibrationResult(0.3, 0.5, 4, "exact", loss, 1.5)
    assert ok.budget == pytest.approx(1.5)
    with pytest.raises(ValidationError):
        CalibrationResult(0.3, 0.5, 4, "exact", loss, 1.6)
    with pytest.raises(ValidationError):
        CalibrationResult(1.2, 0.5, 4, "exact", loss, 0.0)


def test_risk_budget():
    assert risk_budget(4, 0.5) == pytest.approx(1.5)


def test_dataset_round_trip_rows():
    rng = np.random.default_rng(0)
    P = rng.dirichlet(np.ones(4), size=6)
    d = Dataset(P, rng.integers(0, 4, 6))
    back = as_dataset(d.rows())
    assert np.array_equal(back.scores, d.scores)
    assert np.array_equal(back.labels, d.labels)
    assert len(d.subset([0, 2])) == 2
