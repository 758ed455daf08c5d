"""Fitting the 10 simulation parameters to observed pass/churn rates.

The optimizer searches an unconstrained 10-vector: the three attribute
means pass through unchanged and the seven scale parameters (three
attribute standard deviations, the three draw widths, the learning
increment) live in log space, so any finite raw vector decodes to a
valid parameter set.

The objective is the pass-rate mean squared error plus the churn-rate
mean squared error weighted by ``w_churn``, computed on the levels a
training mask selects while the simulation always runs the full
progression (levels interact through population evolution). Every
evaluation re-initializes the population and reuses one fixed
simulation seed: candidates differ only through their parameters,
never through fresh simulation noise.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .cma import OptimizerConfig, minimize
from .population import (
    FULL_MODEL,
    AblationFlags,
    AttemptCapExceeded,
    PopulationParams,
    SimParams,
    init_population,
    simulate_progression,
)
from .seeding import DOMAIN_OBJECTIVE_SIM, derive_seed
from .series import LevelSeries
from .validation import (
    check_mask,
    check_non_negative,
    check_positive_int,
    check_unit_interval_vector,
    check_vector,
)

N_RAW_PARAMS = 10

#: Objective value reported for simulations that cannot produce a full
#: prediction series (population depleted or attempt cap exceeded).
PENALTY = 1.0e6

#: Search start: neutral attribute means and all scales at 0.3.
DEFAULT_RAW_X0 = np.array([0.5, 3.0, 0.0] + [np.log(0.3)] * 7)
DEFAULT_RAW_X0.setflags(write=False)


def decode_params(raw) -> SimParams:
    """Map a raw 10-vector to simulation parameters.

    Layout: [mean_skill, mean_persistence, mean_boredom,
    log std_skill, log std_persistence, log std_boredom,
    log alpha, log beta, log theta, log gamma].
    """
    raw = check_vector(raw, "raw")
    if raw.shape[0] != N_RAW_PARAMS:
        raise ValueError(f"raw must have {N_RAW_PARAMS} entries, got {raw.shape[0]}")
    with np.errstate(over="ignore"):
        scales = np.exp(raw[3:])
    if not np.all(np.isfinite(scales)):
        raise ValueError("raw scale entries overflow the exponential")
    population = PopulationParams(
        mean_skill=raw[0], std_skill=scales[0],
        mean_persistence=raw[1], std_persistence=scales[1],
        mean_boredom=raw[2], std_boredom=scales[2],
    )
    return SimParams(population, alpha=scales[3], beta=scales[4],
                     theta=scales[5], gamma=scales[6])


def encode_params(params: SimParams) -> np.ndarray:
    """Inverse of decode_params; requires strictly positive scales."""
    if not isinstance(params, SimParams):
        raise TypeError("params must be a SimParams")
    pop = params.population
    scales = np.array([pop.std_skill, pop.std_persistence, pop.std_boredom,
                       params.alpha, params.beta, params.theta, params.gamma])
    if np.any(scales <= 0.0):
        raise ValueError("zero scales have no log-space representation")
    return np.concatenate([
        [pop.mean_skill, pop.mean_persistence, pop.mean_boredom],
        np.log(scales),
    ])


def compute_w_churn(human_pass, human_churn) -> float:
    """Variance of pass rates over variance of churn rates.

    Balances the two terms of the objective so neither series dominates
    purely through its numeric spread. Population variances (divisor N).
    """
    p = check_vector(human_pass, "human_pass")
    c = check_vector(human_churn, "human_churn")
    if p.shape != c.shape:
        raise ValueError(f"length mismatch: {p.shape[0]} pass vs {c.shape[0]} churn")
    if p.shape[0] < 2:
        raise ValueError("need at least 2 levels to compute variances")
    churn_var = c.var()
    if churn_var == 0.0:
        raise ValueError("churn rates are constant; their variance is zero "
                         "and the churn weight is undefined")
    return float(p.var() / churn_var)


@dataclass(frozen=True)
class SimulationSettings:
    """How objective evaluations and predictions run the simulation."""

    n_players: int = 2000
    flags: AblationFlags = FULL_MODEL
    seed: int = 0

    def __post_init__(self):
        check_positive_int(self.n_players, "n_players")
        if not isinstance(self.flags, AblationFlags):
            raise TypeError("flags must be an AblationFlags")

    @property
    def init_seed(self) -> int:
        return derive_seed(self.seed, DOMAIN_OBJECTIVE_SIM, 0)

    @property
    def progression_seed(self) -> int:
        return derive_seed(self.seed, DOMAIN_OBJECTIVE_SIM, 1)


def predict_rates(params: SimParams, difficulties,
                  settings: SimulationSettings) -> tuple:
    """Simulate a progression and return an (n, 2) prediction matrix.

    Column 0 holds pass rates, column 1 churn rates. If the population
    depletes, rows for the unsimulated levels are zero-filled and the
    depleting level's index is returned; otherwise the index is None.
    The simulation seed comes from the settings, so identical calls
    produce identical predictions.
    """
    pop = init_population(params.population, settings.n_players,
                          seed=settings.init_seed)
    result = simulate_progression(difficulties, pop, params, settings.flags,
                                  seed=settings.progression_seed,
                                  collect_stats=False)
    n = result.n_levels_requested
    matrix = np.zeros((n, 2))
    done = result.n_levels_simulated
    matrix[:done, 0] = result.series.pass_rates
    matrix[:done, 1] = result.series.churn_rates
    return matrix, result.depleted_at


def build_objective(truth: LevelSeries, difficulties, training_mask,
                    w_churn: float, settings: SimulationSettings = None):
    """Return the scalar fitting objective over raw 10-vectors.

    The returned function decodes the raw vector, simulates the whole
    progression from a fresh population, and scores squared errors on
    the training-mask levels only. Simulations that deplete or blow the
    attempt cap score the fixed penalty instead of raising, keeping the
    objective total for the optimizer.
    """
    if settings is None:
        settings = SimulationSettings()
    if not isinstance(settings, SimulationSettings):
        raise TypeError("settings must be a SimulationSettings")
    if not isinstance(truth, LevelSeries):
        raise TypeError("truth must be a LevelSeries")
    difficulties = check_unit_interval_vector(difficulties, "difficulties")
    n = difficulties.shape[0]
    if len(truth) != n:
        raise ValueError(f"truth has {len(truth)} levels but {n} difficulties given")
    mask = check_mask(training_mask, n, "training_mask")
    w_churn = check_non_negative(w_churn, "w_churn")

    true_pass = truth.pass_rates[mask]
    true_churn = truth.churn_rates[mask]

    def objective(raw) -> float:
        params = decode_params(raw)
        try:
            matrix, depleted_at = predict_rates(params, difficulties, settings)
        except AttemptCapExceeded:
            return PENALTY
        if depleted_at is not None:
            return PENALTY
        pass_err = matrix[mask, 0] - true_pass
        churn_err = matrix[mask, 1] - true_churn
        return float(np.mean(pass_err**2) + w_churn * np.mean(churn_err**2))

    return objective


def fit_sim_params(truth: LevelSeries, difficulties, training_mask=None,
                   w_churn: float = None, settings: SimulationSettings = None,
                   optimizer: OptimizerConfig = None,
                   x0=None) -> tuple:
    """Fit the 10 simulation parameters against observed rates.

    Returns (SimParams, OptResult). ``w_churn`` defaults to the
    pass/churn variance ratio computed on the training-mask levels.
    """
    if training_mask is None:
        training_mask = np.ones(len(truth), dtype=bool)
    else:
        training_mask = check_mask(training_mask, len(truth), "training_mask")
    if w_churn is None:
        w_churn = compute_w_churn(truth.pass_rates[training_mask],
                                  truth.churn_rates[training_mask])
    if optimizer is None:
        optimizer = OptimizerConfig()
    objective = build_objective(truth, difficulties, training_mask, w_churn, settings)
    start = DEFAULT_RAW_X0 if x0 is None else check_vector(x0, "x0")
    result = minimize(objective, start, optimizer)
    return decode_params(result.best_raw_vector), result


class PopulationChurnModel(BaseEstimator):
    """Estimator interface to the simulation fit.

    ``fit`` takes per-level difficulties and an (n, 2) matrix of
    observed [pass_rate, churn_rate] columns; ``predict`` returns the
    same shape. The churn weight, when left at None, is computed from
    the fitting data. ``random_state`` seeds both the optimizer and the
    fixed simulation randomness.
    """

    def __init__(self, n_players: int = 2000, population_size: int = 120,
                 no_improvement_generations: int = 100,
                 max_evaluations: int = 10**6, initial_step_size: float = 0.3,
                 w_churn: float = None, disable_boredom: bool = False,
                 disable_persistence: bool = False, disable_learning: bool = False,
                 disable_draw_noise: bool = False, random_state: int = 0):
        self.n_players = n_players
        self.population_size = population_size
        self.no_improvement_generations = no_improvement_generations
        self.max_evaluations = max_evaluations
        self.initial_step_size = initial_step_size
        self.w_churn = w_churn
        self.disable_boredom = disable_boredom
        self.disable_persistence = disable_persistence
        self.disable_learning = disable_learning
        self.disable_draw_noise = disable_draw_noise
        self.random_state = random_state

    def _settings(self) -> SimulationSettings:
        flags = AblationFlags(
            disable_boredom=self.disable_boredom,
            disable_persistence=self.disable_persistence,
            disable_learning=self.disable_learning,
            disable_draw_noise=self.disable_draw_noise,
        )
        return SimulationSettings(n_players=self.n_players, flags=flags,
                                  seed=self.random_state)

    def fit(self, X, y, mask=None):
        difficulties = np.asarray(X, dtype=np.float64)
        if difficulties.ndim == 2 and difficulties.shape[1] == 1:
            difficulties = difficulties[:, 0]
        y = np.asarray(y, dtype=np.float64)
        if y.ndim != 2 or y.shape[1] != 2:
            raise ValueError(f"y must have shape (n, 2), got {y.shape}")
        truth = LevelSeries(y[:, 0], y[:, 1])
        optimizer = OptimizerConfig(
            population_size=self.population_size,
            no_improvement_generations=self.no_improvement_generations,
            max_evaluations=self.max_evaluations,
            initial_step_size=self.initial_step_size,
            seed=self.random_state,
        )
        self.params_, self.opt_result_ = fit_sim_params(
            truth, difficulties, training_mask=mask, w_churn=self.w_churn,
            settings=self._settings(), optimizer=optimizer)
        self.w_churn_ = (self.w_churn if self.w_churn is not None
                         else compute_w_churn(
                             truth.pass_rates if mask is None else truth.pass_rates[mask],
                             truth.churn_rates if mask is None else truth.churn_rates[mask]))
        return self

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "params_"):
            raise AttributeError("model is not fitted; call fit first")
        difficulties = np.asarray(X, dtype=np.float64)
        if difficulties.ndim == 2 and difficulties.shape[1] == 1:
            difficulties = difficulties[:, 0]
        matrix, self.last_depleted_at_ = predict_rates(
            self.params_, difficulties, self._settings())
        return matrix
