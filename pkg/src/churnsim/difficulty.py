"""Level difficulty derived from scripted-agent gameplay episodes.

Each episode records how one agent playthrough of a level went when
held to the human move budget. Per level the episodes are aggregated
into a fixed 16-feature vector; a least-squares linear model maps the
features to the observed human pass rate; and the (unclamped) model
predictions are min-max normalized into the [0, 1] difficulty scale
the population simulation consumes, with higher predicted pass rates
mapping to lower difficulties.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .validation import check_non_negative, check_vector

#: Names of the aggregated features, in storage order.
FEATURE_NAMES = (
    "cleared_mean", "cleared_std", "cleared_min", "cleared_max",
    "cleared_p5", "cleared_p10", "cleared_p25", "cleared_p50", "cleared_p75",
    "moves_left_mean", "moves_left_std",
    "moves_left_p5", "moves_left_p10", "moves_left_p20",
    "pass_rate_mean", "pass_rate_std",
)

N_FEATURES = len(FEATURE_NAMES)

DEFAULT_RIDGE = 1e-8


@dataclass(frozen=True)
class EpisodeLog:
    """One scripted-agent playthrough of one level.

    ``cleared_goals_frac`` is measured at the human move budget.
    ``moves_left_on_pass`` is present exactly when the agent finished
    within that budget.
    """

    level_id: int
    cleared_goals_frac: float
    passed_with_human_budget: bool
    moves_left_on_pass: int = None

    def __post_init__(self):
        if int(self.level_id) != self.level_id or self.level_id < 1:
            raise ValueError(f"level_id must be an integer >= 1, got {self.level_id}")
        frac = self.cleared_goals_frac
        if not np.isfinite(frac) or not 0.0 <= frac <= 1.0:
            raise ValueError(f"cleared_goals_frac must lie in [0, 1], got {frac}")
        if self.passed_with_human_budget:
            if self.moves_left_on_pass is None:
                raise ValueError("moves_left_on_pass required when the episode passed")
            if int(self.moves_left_on_pass) != self.moves_left_on_pass or self.moves_left_on_pass < 0:
                raise ValueError(
                    f"moves_left_on_pass must be an integer >= 0, got {self.moves_left_on_pass}")
        elif self.moves_left_on_pass is not None:
            raise ValueError("moves_left_on_pass must be absent when the episode failed")


@dataclass(frozen=True)
class RegressionModel:
    """Affine model: prediction = features . weights + bias."""

    weights: np.ndarray
    bias: float

    def __post_init__(self):
        w = check_vector(self.weights, "weights")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if not np.isfinite(self.bias):
            raise ValueError(f"bias must be finite, got {self.bias}")
        object.__setattr__(self, "bias", float(self.bias))


def aggregate_features(episodes) -> np.ndarray:
    """Reduce one level's episodes to the 16-entry feature vector.

    Cleared-goals statistics use the population standard deviation
    (divisor N) and percentiles with linear interpolation at rank
    p/100 * (n - 1). Moves-left statistics cover passing episodes only
    and are all imputed as 0 when nothing passed: together with a zero
    pass-rate mean that encodes "never finishes within budget" without
    introducing sentinel values.
    """
    episodes = list(episodes)
    if not episodes:
        raise ValueError("episodes must be non-empty")
    level_ids = {e.level_id for e in episodes}
    if len(level_ids) != 1:
        raise ValueError(f"episodes must share one level_id, got {sorted(level_ids)}")

    cleared = np.array([e.cleared_goals_frac for e in episodes], dtype=np.float64)
    passed = np.array([e.passed_with_human_budget for e in episodes], dtype=np.float64)
    moves_left = np.array(
        [e.moves_left_on_pass for e in episodes if e.passed_with_human_budget],
        dtype=np.float64)

    feats = np.empty(N_FEATURES, dtype=np.float64)
    feats[0] = cleared.mean()
    feats[1] = cleared.std()
    feats[2] = cleared.min()
    feats[3] = cleared.max()
    feats[4:9] = np.percentile(cleared, [5, 10, 25, 50, 75])
    if moves_left.size:
        feats[9] = moves_left.mean()
        feats[10] = moves_left.std()
        feats[11:14] = np.percentile(moves_left, [5, 10, 20])
    else:
        feats[9:14] = 0.0
    feats[14] = passed.mean()
    feats[15] = passed.std()
    return feats


def build_feature_matrix(episodes) -> tuple:
    """Group a flat episode list by level and stack feature vectors.

    Returns (level_ids, features): the sorted unique ids, int64, and
    the matching (n_levels, 16) design matrix.
    """
    episodes = list(episodes)
    if not episodes:
        raise ValueError("episodes must be non-empty")
    by_level = {}
    for episode in episodes:
        by_level.setdefault(episode.level_id, []).append(episode)
    level_ids = np.array(sorted(by_level), dtype=np.int64)
    features = np.vstack([aggregate_features(by_level[i]) for i in level_ids])
    return level_ids, features


def _check_design(features, targets=None):
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"features must be 2-D, got shape {X.shape}")
    if X.shape[0] == 0:
        raise ValueError("features must contain at least one row")
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    if targets is None:
        return X
    y = check_vector(targets, "targets")
    if y.shape[0] != X.shape[0]:
        raise ValueError(f"targets length {y.shape[0]} does not match {X.shape[0]} rows")
    return X, y


def fit_regression(features, targets, ridge: float = DEFAULT_RIDGE) -> RegressionModel:
    """Least-squares fit of targets = features . w + b.

    The system is centered so the intercept is exact and never
    regularized; the weights get a tiny ridge (default 1e-8) for
    conditioning. With ridge = 0 a rank-deficient system falls back to
    the minimum-norm solution.
    """
    X, y = _check_design(features, targets)
    ridge = check_non_negative(ridge, "ridge")
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    yc = y - y_mean
    if ridge > 0.0:
        gram = Xc.T @ Xc + ridge * np.eye(X.shape[1])
        w = np.linalg.solve(gram, Xc.T @ yc)
    else:
        w, *_ = np.linalg.lstsq(Xc, yc, rcond=None)
    bias = y_mean - x_mean @ w
    return RegressionModel(weights=w, bias=float(bias))


def predict_level_pass_rates(model: RegressionModel, features) -> np.ndarray:
    """Raw affine predictions, one per feature row.

    Deliberately unclamped: difficulty normalization needs the raw
    values. Clamp with ``clamp_unit`` where an actual pass-rate
    estimate is reported.
    """
    if not isinstance(model, RegressionModel):
        raise TypeError("model must be a RegressionModel")
    X = _check_design(features)
    if X.shape[1] != model.weights.shape[0]:
        raise ValueError(
            f"feature dimension {X.shape[1]} does not match model dimension "
            f"{model.weights.shape[0]}")
    return X @ model.weights + model.bias


def clamp_unit(values) -> np.ndarray:
    """Clip predictions into [0, 1] for reporting as pass rates."""
    return np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)


def normalize_difficulty(baseline_predictions) -> np.ndarray:
    """Min-max normalize negated predictions into [0, 1] difficulties.

    Normalization spans all supplied levels, so a level's difficulty
    depends on the whole progression. A constant prediction vector
    (max = min) maps every level to 0.5.
    """
    preds = check_vector(baseline_predictions, "baseline_predictions")
    neg = -preds
    lo = neg.min()
    hi = neg.max()
    if hi == lo:
        return np.full(preds.shape, 0.5)
    return (neg - lo) / (hi - lo)


class BaselinePassRateModel(RegressorMixin, BaseEstimator):
    """Estimator wrapper around the 16-feature linear baseline.

    ``predict`` returns the raw affine output (what difficulty
    normalization consumes); ``predict_pass_rate`` clamps to [0, 1].
    """

    def __init__(self, ridge: float = DEFAULT_RIDGE):
        self.ridge = ridge

    def fit(self, X, y):
        model = fit_regression(X, y, ridge=self.ridge)
        self.weights_ = model.weights
        self.bias_ = model.bias
        self.n_features_in_ = model.weights.shape[0]
        return self

    def _model(self) -> RegressionModel:
        if not hasattr(self, "weights_"):
            raise AttributeError("model is not fitted; call fit first")
        return RegressionModel(self.weights_, self.bias_)

    def predict(self, X) -> np.ndarray:
        return predict_level_pass_rates(self._model(), X)

    def predict_pass_rate(self, X) -> np.ndarray:
        return clamp_unit(self.predict(X))
