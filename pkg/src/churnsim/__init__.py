"""Per-level pass and churn rate prediction for level-based puzzle games.

The toolkit simulates a population of players (skill, persistence,
boredom, per-attempt learning) through a level progression, derives
level difficulties from gameplay episode logs via linear regression,
and fits the simulation parameters to observed per-level pass and
churn rates with a covariance matrix adaptation evolution strategy.
"""

__version__ = "0.1.0"

from .cma import (
    CovarianceError,
    ObjectiveError,
    OptimizerConfig,
    OptResult,
    minimize,
)
from .difficulty import (
    FEATURE_NAMES,
    N_FEATURES,
    BaselinePassRateModel,
    EpisodeLog,
    RegressionModel,
    aggregate_features,
    build_feature_matrix,
    clamp_unit,
    fit_regression,
    normalize_difficulty,
    predict_level_pass_rates,
)
from .evaluation import (
    ABLATION_VARIANTS,
    CVReport,
    CVRunResult,
    EvalConfig,
    FoldPlan,
    Metrics,
    OracleComparison,
    TailReport,
    ablation_suite,
    compute_metrics,
    cross_validate,
    kfold_split,
    oracle_difficulty_experiment,
    tail_holdout,
)
from .fitting import (
    DEFAULT_RAW_X0,
    N_RAW_PARAMS,
    PopulationChurnModel,
    SimulationSettings,
    build_objective,
    compute_w_churn,
    decode_params,
    encode_params,
    fit_sim_params,
    predict_rates,
)
from .population import (
    ATTEMPT_CAP,
    AblationFlags,
    AttemptCapExceeded,
    LevelOutcome,
    Player,
    Population,
    PopulationParams,
    PopulationStats,
    ProgressionResult,
    SimParams,
    init_population,
    population_stats,
    simulate_level,
    simulate_progression,
)
from .series import LevelSeries
from .synthetic import (
    DepletedTruthError,
    SyntheticDataset,
    TruthSpec,
    default_true_params,
    generate_episode_logs,
    generate_truth,
    make_dataset,
    make_difficulty_curve,
)

__all__ = [
    "ABLATION_VARIANTS",
    "ATTEMPT_CAP",
    "AblationFlags",
    "AttemptCapExceeded",
    "BaselinePassRateModel",
    "CVReport",
    "CVRunResult",
    "CovarianceError",
    "DEFAULT_RAW_X0",
    "DepletedTruthError",
    "EpisodeLog",
    "EvalConfig",
    "FEATURE_NAMES",
    "FoldPlan",
    "LevelOutcome",
    "LevelSeries",
    "Metrics",
    "N_FEATURES",
    "N_RAW_PARAMS",
    "ObjectiveError",
    "OptResult",
    "OptimizerConfig",
    "OracleComparison",
    "Player",
    "Population",
    "PopulationChurnModel",
    "PopulationParams",
    "PopulationStats",
    "ProgressionResult",
    "RegressionModel",
    "SimParams",
    "SimulationSettings",
    "SyntheticDataset",
    "TailReport",
    "TruthSpec",
    "__version__",
    "ablation_suite",
    "aggregate_features",
    "build_feature_matrix",
    "build_objective",
    "clamp_unit",
    "compute_metrics",
    "compute_w_churn",
    "cross_validate",
    "decode_params",
    "default_true_params",
    "encode_params",
    "fit_regression",
    "fit_sim_params",
    "generate_episode_logs",
    "generate_truth",
    "init_population",
    "kfold_split",
    "make_dataset",
    "make_difficulty_curve",
    "minimize",
    "normalize_difficulty",
    "oracle_difficulty_experiment",
    "population_stats",
    "predict_level_pass_rates",
    "predict_rates",
    "simulate_level",
    "simulate_progression",
    "tail_holdout",
]
