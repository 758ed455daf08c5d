"""Cross-validation, tail holdout, ablations, and the oracle-difficulty run.

Every experiment here follows the same shape: split the levels into
training and held-out sets, estimate difficulties and the churn weight
from training levels only, fit the simulation parameters against the
training levels, then score predictions on the held-out ones. The
simulation itself always runs over the full progression, because level
outcomes depend on who survived everything before them.

Difficulty estimation deliberately leaks feature rows, never truth:
the training-fitted regression predicts over all levels so the min-max
normalization has a stable range, but held-out pass and churn rates
touch nothing on the training side. ``test_evaluation`` corrupts
held-out truth and checks the fitted parameters do not move.
"""

from dataclasses import dataclass, replace

import numpy as np

from .cma import OptimizerConfig
from .difficulty import (
    DEFAULT_RIDGE,
    clamp_unit,
    fit_regression,
    normalize_difficulty,
    predict_level_pass_rates,
)
from .fitting import SimulationSettings, compute_w_churn, fit_sim_params, predict_rates
from .population import FULL_MODEL, AblationFlags
from .seeding import DOMAIN_CV, derive_seed
from .series import LevelSeries
from .validation import check_positive_int, check_unit_interval_vector

SCHEMES = ("contiguous", "interleaved")

ABLATION_VARIANTS = (
    ("All features", AblationFlags()),
    ("No boredom", AblationFlags(disable_boredom=True)),
    ("No persistence", AblationFlags(disable_persistence=True)),
    ("No learning", AblationFlags(disable_learning=True)),
    ("No random noise in skill and persistence", AblationFlags(disable_draw_noise=True)),
)


@dataclass(frozen=True)
class Metrics:
    """Mean squared and mean absolute error of one rate series."""

    mse: float
    mae: float


def compute_metrics(pred, truth) -> Metrics:
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.ndim != 1 or truth.ndim != 1:
        raise ValueError("pred and truth must be 1-D")
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape[0]} vs {truth.shape[0]}")
    if pred.size == 0:
        raise ValueError("pred and truth must be non-empty")
    if not (np.all(np.isfinite(pred)) and np.all(np.isfinite(truth))):
        raise ValueError("pred and truth must be finite")
    diff = pred - truth
    return Metrics(mse=float(np.mean(diff * diff)), mae=float(np.mean(np.abs(diff))))


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of each level position to one of k folds."""

    k: int
    assignment: np.ndarray
    scheme: str

    def __post_init__(self):
        check_positive_int(self.k, "k")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        a = np.asarray(self.assignment, dtype=np.int64)
        if a.ndim != 1 or a.size == 0:
            raise ValueError("assignment must be a non-empty 1-D array")
        counts = np.bincount(a, minlength=self.k)
        if a.min() < 0 or a.max() >= self.k or counts.min() == 0:
            raise ValueError("every fold must receive at least one level")
        if counts.max() - counts.min() > 1:
            raise ValueError("fold sizes may differ by at most 1")
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)

    @property
    def n_levels(self) -> int:
        return int(self.assignment.shape[0])

    def fold_sizes(self) -> list:
        return np.bincount(self.assignment, minlength=self.k).tolist()

    def test_mask(self, fold: int) -> np.ndarray:
        if not 0 <= fold < self.k:
            raise ValueError(f"fold must be in [0, {self.k}), got {fold}")
        return self.assignment == fold

    def train_mask(self, fold: int) -> np.ndarray:
        return ~self.test_mask(fold)


def kfold_split(n_levels: int, k: int, scheme: str = "contiguous") -> FoldPlan:
    """Split n levels into k folds, contiguous blocks or round-robin.

    Contiguous blocks keep progression order; when n is not divisible
    by k the earlier blocks take the extra levels.
    """
    n_levels = check_positive_int(n_levels, "n_levels")
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool):
        raise TypeError(f"k must be an integer, got {type(k).__name__}")
    if k < 2 or k > n_levels:
        raise ValueError(f"k must satisfy 2 <= k <= n_levels, got k={k}, n={n_levels}")
    if scheme == "contiguous":
        base, rem = divmod(n_levels, k)
        sizes = [base + 1] * rem + [base] * (k - rem)
        assignment = np.repeat(np.arange(k), sizes)
    elif scheme == "interleaved":
        assignment = np.arange(n_levels) % k
    else:
        raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    return FoldPlan(k=int(k), assignment=assignment, scheme=scheme)


@dataclass(frozen=True)
class EvalConfig:
    """Knobs shared by all the evaluation experiments."""

    n_players: int = 2000
    flags: AblationFlags = FULL_MODEL
    optimizer: OptimizerConfig = OptimizerConfig()
    repeats: int = 5
    seed: int = 0
    scheme: str = "contiguous"
    ridge: float = DEFAULT_RIDGE

    def __post_init__(self):
        check_positive_int(self.n_players, "n_players")
        check_positive_int(self.repeats, "repeats")
        if not isinstance(self.flags, AblationFlags):
            raise TypeError("flags must be an AblationFlags")
        if not isinstance(self.optimizer, OptimizerConfig):
            raise TypeError("optimizer must be an OptimizerConfig")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not self.ridge >= 0.0:
            raise ValueError(f"ridge must be >= 0, got {self.ridge}")


@dataclass(frozen=True)
class FoldFit:
    """What one fitting run hands back: predictions plus diagnostics."""

    predictions: np.ndarray
    params: object = None
    best_value: float = None
    evaluations_used: int = None
    termination_reason: str = None
    depleted_at: int = None


@dataclass(frozen=True)
class CVRunResult:
    """Held-out scores for one (fold, repeat) fitting run."""

    fold: int
    repeat: int
    optimizer_seed: int
    params: object
    pass_metrics: Metrics
    churn_metrics: Metrics
    best_value: float
    evaluations_used: int
    termination_reason: str
    depleted_at: int


@dataclass(frozen=True)
class CVReport:
    plan: FoldPlan
    runs: tuple
    aggregate: dict
    pooled: tuple
    baseline: dict
    w_churn_per_fold: tuple
    config: EvalConfig


@dataclass(frozen=True)
class TailReport:
    n_train: int
    n_test: int
    runs: tuple
    aggregate: dict
    baseline: dict
    w_churn: float
    config: EvalConfig


@dataclass(frozen=True)
class OracleComparison:
    oracle: CVReport
    model: CVReport
    churn_mse_ratio: float


def default_fit_predict(truth, difficulties, training_mask, w_churn, config,
                        optimizer_seed) -> FoldFit:
    """Fit simulation parameters on the masked objective, predict all levels.

    This is the seam the experiments run through; tests substitute a
    stub here to exercise the bookkeeping without the optimizer.
    """
    settings = SimulationSettings(n_players=config.n_players, flags=config.flags,
                                  seed=config.seed)
    optimizer = replace(config.optimizer, seed=optimizer_seed)
    params, opt = fit_sim_params(truth, difficulties, training_mask=training_mask,
                                 w_churn=w_churn, settings=settings,
                                 optimizer=optimizer)
    predictions, depleted_at = predict_rates(params, difficulties, settings)
    return FoldFit(predictions=predictions, params=params,
                   best_value=opt.best_value,
                   evaluations_used=opt.evaluations_used,
                   termination_reason=opt.termination_reason,
                   depleted_at=depleted_at)


def _check_sources(truth, features, difficulties):
    if not isinstance(truth, LevelSeries):
        raise TypeError("truth must be a LevelSeries")
    n = len(truth)
    if n == 0:
        raise ValueError("truth must contain at least one level")
    if (features is None) == (difficulties is None):
        raise ValueError("provide exactly one of features or difficulties")
    if features is not None:
        X = np.asarray(features, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] != n:
            raise ValueError(f"features must have shape ({n}, n_features), got {X.shape}")
        return n, X, None
    d = check_unit_interval_vector(difficulties, "difficulties")
    if d.shape[0] != n:
        raise ValueError(f"difficulties length {d.shape[0]} does not match {n} levels")
    return n, None, d


def _fold_difficulties(truth, X, provided, train_mask, ridge):
    """Training-fitted difficulty estimates covering every level."""
    if provided is not None:
        return provided, None
    model = fit_regression(X[train_mask], truth.pass_rates[train_mask], ridge)
    raw = predict_level_pass_rates(model, X)
    return normalize_difficulty(raw), model


def _fold_baseline(truth, X, pass_model, test_mask, ridge):
    """Regression-only predictions, clamped to valid rates."""
    train_mask = ~test_mask
    churn_model = fit_regression(X[train_mask], truth.churn_rates[train_mask], ridge)
    pass_pred = clamp_unit(predict_level_pass_rates(pass_model, X[test_mask]))
    churn_pred = clamp_unit(predict_level_pass_rates(churn_model, X[test_mask]))
    return {
        "pass": compute_metrics(pass_pred, truth.pass_rates[test_mask]),
        "churn": compute_metrics(churn_pred, truth.churn_rates[test_mask]),
    }


def _run_fold(truth, difficulties, train_mask, w_churn, config, fold, fit_predict):
    n = len(truth)
    test_mask = ~train_mask
    runs, fits = [], []
    for repeat in range(config.repeats):
        optimizer_seed = derive_seed(config.seed, DOMAIN_CV, fold, repeat)
        fit = fit_predict(truth, difficulties, train_mask, w_churn, config,
                          optimizer_seed)
        predictions = np.asarray(fit.predictions, dtype=np.float64)
        if predictions.shape != (n, 2):
            raise ValueError(f"fit must predict shape ({n}, 2), got {predictions.shape}")
        runs.append(CVRunResult(
            fold=fold, repeat=repeat, optimizer_seed=optimizer_seed,
            params=fit.params,
            pass_metrics=compute_metrics(predictions[test_mask, 0],
                                         truth.pass_rates[test_mask]),
            churn_metrics=compute_metrics(predictions[test_mask, 1],
                                          truth.churn_rates[test_mask]),
            best_value=fit.best_value,
            evaluations_used=fit.evaluations_used,
            termination_reason=fit.termination_reason,
            depleted_at=fit.depleted_at,
        ))
        fits.append(predictions)
    return runs, fits


_METRIC_GETTERS = (
    ("pass_mse", lambda r: r.pass_metrics.mse),
    ("pass_mae", lambda r: r.pass_metrics.mae),
    ("churn_mse", lambda r: r.churn_metrics.mse),
    ("churn_mae", lambda r: r.churn_metrics.mae),
)


def _aggregate_runs(runs, k):
    """Mean/std over every run, plus std across per-fold means.

    Both spreads are reported because they answer different questions:
    run-level std mixes fold difficulty with optimizer luck, fold-mean
    std isolates the former. Population std throughout.
    """
    out = {}
    for name, get in _METRIC_GETTERS:
        values = np.array([get(r) for r in runs], dtype=np.float64)
        fold_means = [values[[i for i, r in enumerate(runs) if r.fold == f]].mean()
                      for f in range(k)]
        out[name] = {
            "mean": float(values.mean()),
            "std": float(values.std()),
            "std_across_fold_means": float(np.std(fold_means)),
        }
    return out


def _aggregate_baseline(per_fold):
    if not per_fold:
        return None
    out = {"per_fold": tuple(per_fold)}
    for name, series in (("pass", "pass"), ("churn", "churn")):
        for stat in ("mse", "mae"):
            values = np.array([getattr(f[series], stat) for f in per_fold])
            out[f"{name}_{stat}"] = {"mean": float(values.mean()),
                                     "std": float(values.std())}
    return out


def cross_validate(truth: LevelSeries, features=None, difficulties=None,
                   k: int = 5, config: EvalConfig = None,
                   fit_predict=None) -> CVReport:
    """Score held-out predictions over a k-fold split of the levels.

    Exactly one difficulty source must be given: a per-level feature
    matrix (a fresh regression is fitted per fold) or precomputed
    difficulties in [0, 1] (used as-is for every fold). Each fold is
    fitted ``config.repeats`` times, varying only the optimizer seed.
    The baseline entry, present on the features path, scores clamped
    regression-only predictions of both rates on the same held-out
    levels.
    """
    n, X, provided = _check_sources(truth, features, difficulties)
    if config is None:
        config = EvalConfig()
    if fit_predict is None:
        fit_predict = default_fit_predict
    plan = kfold_split(n, k, config.scheme)

    all_runs, baselines, w_churns = [], [], []
    pooled_pred = [np.zeros((n, 2)) for _ in range(config.repeats)]
    for fold in range(plan.k):
        train_mask = plan.train_mask(fold)
        test_mask = ~train_mask
        fold_difficulties, pass_model = _fold_difficulties(
            truth, X, provided, train_mask, config.ridge)
        w_churn = compute_w_churn(truth.pass_rates[train_mask],
                                  truth.churn_rates[train_mask])
        w_churns.append(w_churn)
        if pass_model is not None:
            baselines.append(_fold_baseline(truth, X, pass_model, test_mask,
                                            config.ridge))
        runs, fits = _run_fold(truth, fold_difficulties, train_mask, w_churn,
                               config, fold, fit_predict)
        all_runs.extend(runs)
        for repeat, predictions in enumerate(fits):
            pooled_pred[repeat][test_mask] = predictions[test_mask]

    pooled = tuple(
        {"pass": compute_metrics(p[:, 0], truth.pass_rates),
         "churn": compute_metrics(p[:, 1], truth.churn_rates)}
        for p in pooled_pred)
    return CVReport(plan=plan, runs=tuple(all_runs),
                    aggregate=_aggregate_runs(all_runs, plan.k),
                    pooled=pooled,
                    baseline=_aggregate_baseline(baselines),
                    w_churn_per_fold=tuple(w_churns), config=config)


def tail_holdout(truth: LevelSeries, features=None, difficulties=None,
                 config: EvalConfig = None, holdout_fraction: float = 0.2,
                 fit_predict=None) -> TailReport:
    """Train on the early levels, score on the final stretch.

    Harder than k-fold scoring: the held-out tail sits beyond every
    training level, so predictions extrapolate the progression instead
    of interpolating gaps.
    """
    n, X, provided = _check_sources(truth, features, difficulties)
    if config is None:
        config = EvalConfig()
    if fit_predict is None:
        fit_predict = default_fit_predict
    if not 0.0 < holdout_fraction < 1.0:
        raise ValueError(f"holdout_fraction must be in (0, 1), got {holdout_fraction}")
    n_test = max(1, int(round(n * holdout_fraction)))
    if n_test >= n:
        raise ValueError(f"holdout of {n_test} levels leaves no training data")
    train_mask = np.zeros(n, dtype=bool)
    train_mask[:n - n_test] = True

    fold_difficulties, pass_model = _fold_difficulties(
        truth, X, provided, train_mask, config.ridge)
    w_churn = compute_w_churn(truth.pass_rates[train_mask],
                              truth.churn_rates[train_mask])
    baseline = None
    if pass_model is not None:
        baseline = _aggregate_baseline(
            [_fold_baseline(truth, X, pass_model, ~train_mask, config.ridge)])
    runs, _ = _run_fold(truth, fold_difficulties, train_mask, w_churn,
                        config, 0, fit_predict)
    return TailReport(n_train=n - n_test, n_test=n_test, runs=tuple(runs),
                      aggregate=_aggregate_runs(runs, 1), baseline=baseline,
                      w_churn=w_churn, config=config)


def ablation_suite(truth: LevelSeries, features=None, difficulties=None,
                   k: int = 5, config: EvalConfig = None,
                   fit_predict=None):
    """Refit and score the model with each mechanism switched off.

    Returns (table, reports): the table maps each variant name to its
    aggregate held-out pass and churn MSE; reports holds the full
    CVReport per variant. Every variant shares the fold plan and the
    optimizer seeds, so rows differ only by the disabled mechanism,
    which acts during both fitting and prediction.
    """
    if config is None:
        config = EvalConfig()
    table, reports = {}, {}
    for name, flags in ABLATION_VARIANTS:
        report = cross_validate(truth, features=features,
                                difficulties=difficulties, k=k,
                                config=replace(config, flags=flags),
                                fit_predict=fit_predict)
        table[name] = {
            "pass_mse": report.aggregate["pass_mse"]["mean"],
            "churn_mse": report.aggregate["churn_mse"]["mean"],
        }
        reports[name] = report
    return table, reports


def oracle_difficulty_experiment(truth: LevelSeries, features, k: int = 5,
                                 config: EvalConfig = None,
                                 fit_predict=None) -> OracleComparison:
    """Compare fitted predictions under oracle vs estimated difficulty.

    The oracle arm replaces the regression estimate with 1 minus the
    observed pass rate, unnormalized; the model arm runs the usual
    feature pipeline. The ratio of their aggregate churn MSEs says how
    much prediction error the difficulty estimate itself costs.
    """
    if not isinstance(truth, LevelSeries):
        raise TypeError("truth must be a LevelSeries")
    oracle_difficulties = 1.0 - truth.pass_rates
    oracle = cross_validate(truth, difficulties=oracle_difficulties, k=k,
                            config=config, fit_predict=fit_predict)
    model = cross_validate(truth, features=features, k=k, config=config,
                           fit_predict=fit_predict)
    oracle_mse = oracle.aggregate["churn_mse"]["mean"]
    model_mse = model.aggregate["churn_mse"]["mean"]
    ratio = oracle_mse / model_mse if model_mse > 0.0 else float("nan")
    return OracleComparison(oracle=oracle, model=model, churn_mse_ratio=ratio)
