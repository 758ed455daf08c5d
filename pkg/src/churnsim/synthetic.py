"""Synthetic ground truth with known hidden parameters.

Real per-level pass/churn data is proprietary, so validation runs
against datasets this module fabricates: a hidden parameter set plays
a level progression to produce "observed" rates, and a matching corpus
of scripted-agent episodes carries a recoverable difficulty signal for
the feature regression. All randomness here lives in seed domains
disjoint from every fitting-side domain, so the truth can never share
a stream with the machinery trying to recover it.

Episode generator convention (version 1): an agent episode on a level
of difficulty d draws an effort multiplier L ~ LogNormal(0, 0.4) and
needs ceil(budget * d * L / 0.8) moves against a budget of 30. Within
budget: the episode passes with all goals cleared and reports the
moves left. Over budget: it fails, clearing budget/needed of the
goals. Expected cleared fraction, pass probability, and moves left are
all monotone in d, and d = 0 always passes with a full clear.
"""

from dataclasses import dataclass, field

import numpy as np

from .difficulty import EpisodeLog
from .population import (
    PopulationParams,
    SimParams,
    init_population,
    simulate_progression,
)
from .seeding import (
    DOMAIN_DIFFICULTY_CURVE,
    DOMAIN_EPISODES,
    DOMAIN_TRUTH,
    derive_seed,
    substream,
)
from .series import LevelSeries
from .validation import check_positive_int, check_unit_interval_vector

EPISODE_GENERATOR_VERSION = 1
MOVES_BUDGET = 30
_EFFORT_SIGMA = 0.4
_BUDGET_HEADROOM = 0.8


@dataclass(frozen=True)
class TruthSpec:
    """Recipe for one synthetic ground-truth dataset."""

    true_params: SimParams
    level_difficulties: np.ndarray
    n_players: int = 2000
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.true_params, SimParams):
            raise TypeError("true_params must be a SimParams")
        d = check_unit_interval_vector(self.level_difficulties, "level_difficulties")
        d.setflags(write=False)
        object.__setattr__(self, "level_difficulties", d)
        check_positive_int(self.n_players, "n_players")


class DepletedTruthError(RuntimeError):
    """The hidden parameters emptied the population mid-progression."""


def generate_truth(spec: TruthSpec) -> LevelSeries:
    """Play the progression with the hidden parameters; record the rates.

    Uses truth-domain sub-seeds, so fitting-side simulations with the
    same master seed still see independent randomness. Depletion is an
    error here: a ground-truth set with missing levels is useless, so
    the recipe must be chosen gentle enough to keep players alive.
    """
    if not isinstance(spec, TruthSpec):
        raise TypeError("spec must be a TruthSpec")
    pop = init_population(spec.true_params.population, spec.n_players,
                          seed=derive_seed(spec.seed, DOMAIN_TRUTH, 0))
    result = simulate_progression(spec.level_difficulties, pop, spec.true_params,
                                  seed=derive_seed(spec.seed, DOMAIN_TRUTH, 1),
                                  collect_stats=False)
    if result.depleted:
        raise DepletedTruthError(
            f"population emptied at level index {result.depleted_at}; "
            f"soften the difficulty curve or the churn parameters")
    n = result.n_levels_requested
    return LevelSeries(result.series.pass_rates, result.series.churn_rates,
                       level_ids=np.arange(1, n + 1), role="truth")


def generate_episode_logs(level_difficulties, episodes_per_level: int,
                          seed: int = 0) -> list:
    """Fabricate scripted-agent episodes for every level.

    Returns EpisodeLog records grouped by level in order, with 1-based
    level ids. See the module docstring for the generative convention.
    """
    difficulties = check_unit_interval_vector(level_difficulties, "level_difficulties")
    episodes_per_level = check_positive_int(episodes_per_level, "episodes_per_level")
    logs = []
    for i, d in enumerate(difficulties):
        rng = substream(seed, DOMAIN_EPISODES, i)
        effort = rng.lognormal(mean=0.0, sigma=_EFFORT_SIGMA, size=episodes_per_level)
        moves_needed = np.ceil(MOVES_BUDGET * d * effort / _BUDGET_HEADROOM)
        for need in moves_needed:
            if need <= MOVES_BUDGET:
                logs.append(EpisodeLog(
                    level_id=i + 1,
                    cleared_goals_frac=1.0,
                    passed_with_human_budget=True,
                    moves_left_on_pass=int(MOVES_BUDGET - need),
                ))
            else:
                logs.append(EpisodeLog(
                    level_id=i + 1,
                    cleared_goals_frac=float(MOVES_BUDGET / need),
                    passed_with_human_budget=False,
                ))
    return logs


def make_difficulty_curve(n_levels: int, seed: int = 0,
                          base_range=(0.12, 0.82), cycle_length: int = 12,
                          cycle_amplitude: float = 0.12,
                          noise_scale: float = 0.03) -> np.ndarray:
    """Build a difficulty progression with ramp, cycles, and jitter.

    A rising baseline with periodic hard-easy swings: enough structure
    for the population simulation's carryover effects to matter, and
    enough variation for difficulty estimation to have signal.
    """
    n_levels = check_positive_int(n_levels, "n_levels")
    lo, hi = float(base_range[0]), float(base_range[1])
    if not 0.0 <= lo <= hi <= 1.0:
        raise ValueError(f"base_range must satisfy 0 <= lo <= hi <= 1, got {base_range}")
    rng = substream(seed, DOMAIN_DIFFICULTY_CURVE)
    t = np.arange(n_levels)
    ramp = lo + (hi - lo) * t / max(1, n_levels - 1)
    cycles = cycle_amplitude * np.sin(2.0 * np.pi * t / cycle_length)
    noise = noise_scale * rng.standard_normal(n_levels)
    return np.clip(ramp + cycles + noise, 0.02, 0.98)


@dataclass(frozen=True)
class SyntheticDataset:
    """A complete fabricated dataset: truth, difficulties, episodes."""

    spec: TruthSpec
    truth: LevelSeries
    episodes: list = field(repr=False)


def default_true_params() -> SimParams:
    """Hidden parameters used by the stock synthetic datasets.

    Chosen so that every mechanism leaves a visible trace: persistence
    churn and boredom churn both occur, learning shortens attempt
    counts on hard levels, and the population survives a long
    progression.
    """
    return SimParams(
        PopulationParams(
            mean_skill=0.42, std_skill=0.18,
            mean_persistence=2.0, std_persistence=1.0,
            mean_boredom=-2.2, std_boredom=0.5,
        ),
        alpha=0.12, beta=0.35, theta=1.0, gamma=0.05,
    )


def make_dataset(n_levels: int = 168, episodes_per_level: int = 50,
                 n_players: int = 2000, seed: int = 0,
                 true_params: SimParams = None) -> SyntheticDataset:
    """Bundle a difficulty curve, its truth series, and episode logs."""
    params = default_true_params() if true_params is None else true_params
    difficulties = make_difficulty_curve(n_levels, seed=seed)
    spec = TruthSpec(true_params=params, level_difficulties=difficulties,
                     n_players=n_players, seed=seed)
    truth = generate_truth(spec)
    episodes = generate_episode_logs(difficulties, episodes_per_level, seed=seed)
    return SyntheticDataset(spec=spec, truth=truth, episodes=episodes)
