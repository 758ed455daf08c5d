"""Episode aggregation, baseline regression, and difficulty normalization."""

import math

import numpy as np
import pytest
from sklearn.base import clone

from churnsim.difficulty import (
    FEATURE_NAMES,
    N_FEATURES,
    BaselinePassRateModel,
    EpisodeLog,
    RegressionModel,
    aggregate_features,
    clamp_unit,
    fit_regression,
    normalize_difficulty,
    predict_level_pass_rates,
)


def failed_episode(level_id, cleared):
    return EpisodeLog(level_id, cleared, False)


def passed_episode(level_id, cleared, moves_left):
    return EpisodeLog(level_id, cleared, True, moves_left)


def pinv_affine_fit(X, y):
    # Independent route: minimum-norm least squares on the design
    # matrix augmented with a constant column.
    A = np.column_stack([X, np.ones(len(y))])
    coef = np.linalg.pinv(A) @ y
    return coef[:-1], coef[-1]


# --- aggregate_features ---


def test_feature_vector_layout():
    assert N_FEATURES == 16
    assert len(FEATURE_NAMES) == 16
    assert FEATURE_NAMES[13] == "moves_left_p20"


def test_cleared_goals_statistics_hand_computed():
    eps = [failed_episode(3, c) for c in (0.2, 0.4, 0.6, 0.8, 1.0)]
    f = aggregate_features(eps)
    assert np.allclose(f[0], 0.6, atol=1e-12)
    assert np.allclose(f[1], math.sqrt(0.08), atol=1e-12)
    assert f[2] == 0.2 and f[3] == 1.0
    # Linear interpolation at rank p/100 * (n-1).
    assert np.allclose(f[4:9], [0.24, 0.28, 0.4, 0.6, 0.8], atol=1e-12)
    assert f[14] == 0.0 and f[15] == 0.0


def test_constant_failed_episodes():
    f = aggregate_features([failed_episode(1, 0.5)] * 5)
    assert np.array_equal(f[:9], [0.5, 0.0, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5])
    assert np.array_equal(f[9:14], np.zeros(5))  # imputed: nothing passed
    assert f[14] == 0.0 and f[15] == 0.0


def test_moves_left_statistics_cover_passers_only():
    eps = [
        passed_episode(2, 1.0, 10),
        passed_episode(2, 1.0, 20),
        passed_episode(2, 1.0, 30),
        failed_episode(2, 0.3),
        failed_episode(2, 0.1),
    ]
    f = aggregate_features(eps)
    assert f[9] == 20.0
    assert np.allclose(f[10], math.sqrt(200.0 / 3.0), atol=1e-12)
    # p20 of [10, 20, 30]: rank 0.2 * 2 = 0.4 between 10 and 20.
    assert np.allclose(f[11:14], [11.0, 12.0, 14.0], atol=1e-12)
    assert f[14] == 0.6
    assert np.allclose(f[15], math.sqrt(0.24), atol=1e-12)


def test_aggregate_is_permutation_invariant():
    eps = [passed_episode(5, 0.9, 4), failed_episode(5, 0.2),
           passed_episode(5, 1.0, 11), failed_episode(5, 0.7)]
    f = aggregate_features(eps)
    g = aggregate_features(eps[::-1])
    assert np.array_equal(f, g)


def test_aggregate_rejects_empty_and_mixed_levels():
    with pytest.raises(ValueError):
        aggregate_features([])
    with pytest.raises(ValueError):
        aggregate_features([failed_episode(1, 0.5), failed_episode(2, 0.5)])


def test_episode_log_invariants():
    with pytest.raises(ValueError):
        EpisodeLog(1, 0.5, True)  # passed without moves_left
    with pytest.raises(ValueError):
        EpisodeLog(1, 0.5, False, 3)  # failed with moves_left
    with pytest.raises(ValueError):
        EpisodeLog(1, 1.5, False)
    with pytest.raises(ValueError):
        EpisodeLog(0, 0.5, False)
    with pytest.raises(ValueError):
        EpisodeLog(1, 0.5, True, -1)


# --- fit_regression ---


def test_fit_exact_line_through_single_feature():
    X = np.zeros((3, 16))
    X[:, 0] = [1.0, 2.0, 3.0]
    y = np.array([2.0, 4.0, 6.0])
    model = fit_regression(X, y)
    assert abs(model.weights[0] - 2.0) < 1e-7
    assert np.all(np.abs(model.weights[1:]) < 1e-8)
    assert abs(model.bias) < 1e-7


def test_fit_constant_targets():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(20, 16))
    model = fit_regression(X, np.full(20, 3.25))
    assert np.all(np.abs(model.weights) < 1e-8)
    assert abs(model.bias - 3.25) < 1e-8


def test_fit_recovers_known_coefficients():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(50, 16))
    w_true = rng.normal(size=16)
    b_true = -0.7
    y = X @ w_true + b_true
    model = fit_regression(X, y)
    assert np.allclose(model.weights, w_true, atol=1e-8)
    assert abs(model.bias - b_true) < 1e-8
    w_ref, b_ref = pinv_affine_fit(X, y)
    assert np.allclose(model.weights, w_ref, atol=1e-7)
    assert abs(model.bias - b_ref) < 1e-7


def test_fit_matches_pinv_oracle_with_noise():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(40, 16))
    y = X @ rng.normal(size=16) + 0.3 + rng.normal(scale=0.5, size=40)
    model = fit_regression(X, y)
    w_ref, b_ref = pinv_affine_fit(X, y)
    assert np.allclose(model.weights, w_ref, atol=1e-6)
    assert abs(model.bias - b_ref) < 1e-6


def test_residuals_orthogonal_to_design():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(60, 16))
    y = rng.normal(size=60)
    model = fit_regression(X, y)
    resid = y - (X @ model.weights + model.bias)
    assert abs(resid.sum()) < 1e-8          # constant column
    assert np.all(np.abs(X.T @ resid) < 1e-6)  # each feature column


def test_fit_never_loses_to_zero_model():
    rng = np.random.default_rng(4)
    for trial in range(5):
        X = rng.normal(size=(30, 16))
        y = rng.uniform(size=30)
        model = fit_regression(X, y)
        fit_mse = np.mean((y - (X @ model.weights + model.bias)) ** 2)
        zero_mse = np.mean((y - y.mean()) ** 2)
        assert fit_mse <= zero_mse + 1e-12


def test_rank_deficient_minimum_norm_when_unridged():
    # Duplicated column: the minimum-norm solution splits the weight.
    rng = np.random.default_rng(5)
    x = rng.normal(size=30)
    X = np.column_stack([x, x])
    y = 3.0 * x + 1.0
    model = fit_regression(X, y, ridge=0.0)
    assert np.allclose(model.weights, [1.5, 1.5], atol=1e-8)
    assert abs(model.bias - 1.0) < 1e-8


def test_fit_rejects_bad_input():
    with pytest.raises(ValueError):
        fit_regression(np.ones((2, 3)), [1.0, float("nan")])
    with pytest.raises(ValueError):
        fit_regression(np.full((2, 3), np.inf), [1.0, 2.0])
    with pytest.raises(ValueError):
        fit_regression(np.ones((2, 3)), [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        fit_regression(np.ones((2, 3)), [1.0, 2.0], ridge=-1.0)


# --- predict_level_pass_rates ---


def test_predict_constant_model():
    model = RegressionModel(np.zeros(16), 0.5)
    X = np.random.default_rng(6).normal(size=(7, 16))
    assert np.array_equal(predict_level_pass_rates(model, X), np.full(7, 0.5))


def test_predict_affine_identity():
    w = np.zeros(16)
    w[0] = 1.0
    model = RegressionModel(w, 0.0)
    X = np.zeros((1, 16))
    X[0, 0] = 0.3
    assert predict_level_pass_rates(model, X)[0] == 0.3


def test_predict_matches_dot_product_oracle():
    rng = np.random.default_rng(7)
    model = RegressionModel(rng.normal(size=16), 0.2)
    X = rng.normal(size=(11, 16))
    got = predict_level_pass_rates(model, X)
    want = [sum(X[i, j] * model.weights[j] for j in range(16)) + 0.2 for i in range(11)]
    assert np.allclose(got, want, atol=1e-12)


def test_predict_rejects_dimension_mismatch():
    model = RegressionModel(np.zeros(16), 0.0)
    with pytest.raises(ValueError):
        predict_level_pass_rates(model, np.zeros((2, 15)))


# --- normalize_difficulty ---


def test_normalize_hand_example():
    assert np.allclose(normalize_difficulty([0.2, 0.5, 0.8]), [1.0, 0.5, 0.0], atol=1e-12)


def test_normalize_degenerate_cases():
    assert np.array_equal(normalize_difficulty([0.4, 0.4, 0.4]), [0.5, 0.5, 0.5])
    assert np.array_equal(normalize_difficulty([2.0]), [0.5])


def test_normalize_range_and_monotonicity():
    rng = np.random.default_rng(8)
    preds = rng.normal(size=25)
    d = normalize_difficulty(preds)
    assert d.min() == 0.0 and d.max() == 1.0
    order = np.argsort(preds)
    assert np.all(np.diff(d[order]) <= 1e-12)  # higher prediction, lower difficulty


def test_normalize_rejects_bad_input():
    with pytest.raises(ValueError):
        normalize_difficulty([])
    with pytest.raises(ValueError):
        normalize_difficulty([0.1, float("inf")])


def test_clamp_unit():
    assert np.array_equal(clamp_unit([-0.5, 0.3, 1.7]), [0.0, 0.3, 1.0])


# --- estimator wrapper ---


def test_estimator_matches_functional_path():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(30, 16))
    y = rng.uniform(size=30)
    est = BaselinePassRateModel().fit(X, y)
    model = fit_regression(X, y)
    assert np.array_equal(est.predict(X), predict_level_pass_rates(model, X))
    assert np.all(est.predict_pass_rate(X) >= 0.0)
    assert np.all(est.predict_pass_rate(X) <= 1.0)


def test_estimator_sklearn_conventions():
    est = BaselinePassRateModel(ridge=1e-6)
    assert est.get_params() == {"ridge": 1e-6}
    cloned = clone(est)
    assert cloned.get_params() == {"ridge": 1e-6}
    est.set_params(ridge=0.0)
    assert est.ridge == 0.0
    with pytest.raises(AttributeError):
        BaselinePassRateModel().predict(np.zeros((1, 16)))
