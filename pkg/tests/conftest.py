import numpy as np
import pytest
from hypothesis import strategies as st

from ordinal_crc import LossSpec, ScoreVector, WeightScheme

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@st.composite
def score_vectors(draw, min_K=2, max_K=8):
    K = draw(st.integers(min_K, max_K))
    raw = draw(st.lists(st.floats(1e-3, 1.0), min_size=K, max_size=K))
    p = np.array(raw)
    return ScoreVector(p / p.sum())


@st.composite
def loss_specs(draw, K):
    kind = draw(st.sampled_from(["equal", "linear", "random", "divergence"]))
    if kind == "divergence":
        return LossSpec.divergence()
    if kind == "equal":
        return LossSpec.weighted(WeightScheme.equal(K))
    if kind == "linear":
        return LossSpec.weighted(WeightScheme.linear(K))
    w = draw(st.lists(st.floats(0.05, 1.0), min_size=K, max_size=K))
    return LossSpec.weighted(WeightScheme(w))


def random_loss(rng, K):
    kind = rng.integers(4)
    if kind == 0:
        return LossSpec.divergence()
    if kind == 1:
        return LossSpec.weighted(WeightScheme.equal(K))
    if kind == 2:
        return LossSpec.weighted(WeightScheme.linear(K))
    return LossSpec.weighted(WeightScheme(rng.uniform(0.05, 1.0, K)))


@pytest.fixture
def bump():
    return ScoreVector([0.1, 0.2, 0.4, 0.2, 0.1])


@pytest.fixture
def equal5():
    return WeightScheme.equal(5)


@pytest.fixture
def linear5():
    return WeightScheme.linear(5)
