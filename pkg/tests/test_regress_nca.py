import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dissipate.regress import (
    NcaModel,
    RegressionError,
    fit_nca,
    model_from_dict,
    model_to_dict,
    nca_objective,
    nca_probabilities,
)


def objective_oracle(X, y, w, reg, sigma=1.0):
    """Direct double loop over pairs."""
    m = X.shape[0]
    total = 0.0
    for i in range(m):
        k = [math.exp(-sum(w[r] ** 2 * abs(X[i, r] - X[j, r]) for r in range(X.shape[1])) / sigma)
             if j != i else 0.0 for j in range(m)]
        s = sum(k)
        total += sum(k[j] / s * abs(y[i] - y[j]) for j in range(m))
    return total / m + reg * float(np.sum(np.asarray(w) ** 2))


def single_feature_data(seed, m=80):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (m, 4))
    y = np.sin(2.5 * X[:, 0]) + 0.05 * rng.normal(size=m)
    return X, y


@given(st.integers(0, 2**31), st.integers(3, 25), st.integers(1, 5))
def test_probability_rows(seed, m, n):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(m, n))
    P = nca_probabilities(X, rng.uniform(0, 3, n))
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(np.diag(P) == 0.0)
    assert np.all(P >= 0)


def test_zero_weights_give_uniform_probabilities():
    X = np.random.default_rng(0).normal(size=(7, 3))
    P = nca_probabilities(X, np.zeros(3))
    off = ~np.eye(7, dtype=bool)
    assert np.all(P[off] == 1.0 / 6.0)


@pytest.mark.parametrize("seed", range(3))
def test_objective_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    X, y = rng.uniform(-1, 1, (15, 3)), rng.normal(size=15)
    w = rng.uniform(0, 2, 3)
    f, _ = nca_objective(X, y, w, 0.07)
    assert f == pytest.approx(objective_oracle(X, y, w, 0.07), rel=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    X, y = rng.uniform(-1, 1, (25, 4)), rng.normal(size=25)
    w = rng.uniform(0.2, 1.5, 4)
    _, g = nca_objective(X, y, w, 0.04)
    h = 1e-6
    fd = [(nca_objective(X, y, w + h * e, 0.04)[0] - nca_objective(X, y, w - h * e, 0.04)[0])
          / (2 * h) for e in np.eye(4)]
    np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-8)


def test_single_relevant_feature_dominates():
    X, y = single_feature_data(0)
    m = fit_nca((X, y))
    w = np.abs(m.weights)
    assert np.all(w[1:] < 0.1 * w[0])
    fw = m.feature_weights()
    assert fw.weights.sum() == pytest.approx(1.0) and fw.weights[0] > 0.7


def test_fit_beats_coarse_lattice_oracle():
    X, y = single_feature_data(1, m=40)
    reg = 1 / 40
    m = fit_nca((X, y))
    lattice = [0.0, 1.0, 2.0, 3.0]
    best = min(objective_oracle(X, y, np.array(w), reg) for w in itertools.product(lattice, repeat=4))
    assert m.objective <= best + 1e-9


def test_large_regularization_shrinks_to_uniform_limit():
    X, y = single_feature_data(2, m=30)
    m = fit_nca((X, y), regularization=1e4)
    assert np.max(np.abs(m.weights)) < 1e-3
    loo_uniform = np.mean([np.mean(np.abs(y[i] - np.delete(y, i))) for i in range(30)])
    assert m.objective == pytest.approx(loo_uniform, rel=1e-3)


def test_objective_trace_monotone():
    X, y = single_feature_data(3)
    t = fit_nca((X, y)).objective_trace
    assert t.size > 1 and np.all(np.diff(t) <= 0)


def test_predict_limits():
    Xtr = np.array([[0.0, 0.0], [1.0, 1.0], [-1.0, 0.5]])
    ytr = np.array([1.0, 5.0, 9.0])
    zero = NcaModel(np.zeros(2), 0.0, 1.0, Xtr, ytr)
    assert zero.predict(np.array([[0.3, 0.3]]))[0] == pytest.approx(ytr.mean())
    sharp = NcaModel(np.array([30.0, 30.0]), 0.0, 1.0, Xtr, ytr)
    assert sharp.predict(Xtr[1:2])[0] == pytest.approx(5.0, abs=1e-9)


def test_two_point_prediction_hand_value():
    Xtr = np.array([[0.0], [1.0]])
    ytr = np.array([2.0, 6.0])
    m = NcaModel(np.array([1.0]), 0.0, 1.0, Xtr, ytr)
    # at x = 0.25: distances 0.25 and 0.75 -> weights e^-0.25, e^-0.75
    a, b = math.exp(-0.25), math.exp(-0.75)
    assert m.predict(np.array([[0.25]]))[0] == pytest.approx((2 * a + 6 * b) / (a + b), rel=1e-14)


def test_batch_equals_rowwise_and_round_trip():
    X, y = single_feature_data(4, m=40)
    m = fit_nca((X, y))
    Q = np.random.default_rng(0).uniform(-1, 1, (5, 4))
    np.testing.assert_allclose(m.predict(Q), [m.predict(q[None])[0] for q in Q], rtol=1e-14)
    back = model_from_dict(model_to_dict(m))
    np.testing.assert_array_equal(back.predict(Q), m.predict(Q))


def test_seeded_fit_is_deterministic():
    X, y = single_feature_data(5, m=40)
    a, b = fit_nca((X, y), seed=3), fit_nca((X, y), seed=3)
    np.testing.assert_array_equal(a.weights, b.weights)


def test_errors():
    with pytest.raises(RegressionError):
        fit_nca((np.zeros((2, 1)), np.zeros(2)))
    with pytest.raises(RegressionError):
        fit_nca(single_feature_data(0, 10), regularization=-1.0)
