"""Player population model and the per-level pass/churn simulation.

A population is a set of players, each carrying three attributes:

* ``skill``: position on the same scale as level difficulty,
* ``persistence``: how many failed attempts the player tolerates,
* ``boredom``: threshold for quitting after a pass.

One level is simulated by drawing, per player, an effective skill
``s ~ N(skill, alpha)`` and an effective persistence
``t ~ N(persistence, beta)``, then replaying attempts: an attempt
passes when ``s >= difficulty``; a failed attempt raises ``s`` by the
learning increment ``gamma`` and the player churns once the attempt
count exceeds ``t``. A passing player contributes ``1/n_attempts`` to
the pass-rate numerator and then churns with probability
``P(N(0, theta) < boredom)``. Survivors are resampled back to the
original size (uniform, with replacement) to form the population for
the next level.

The attempt replay is resolved in closed form (the attempt index at
which each exit condition fires is computable directly), compiled with
numba. A literal attempt-by-attempt reference implementation lives in
the test suite and replays identical draws.

Randomness protocol: each simulated level consumes one dedicated
generator. ``simulate_level`` derives it from ``(seed, DOMAIN_LEVEL)``;
``simulate_progression`` derives level i's generator from
``(seed, DOMAIN_LEVEL, i)``, so a level's draws depend only on the
master seed and the level index, never on earlier levels. Per level the
generator yields a fixed-shape block ``z = standard_normal((3, m))``
(rows: skill, persistence, boredom noise; column p belongs to player
slot p) followed by ``u = random(m)`` used for resampling picks. The
shapes never depend on outcomes or ablation flags, so player slot p
always sees the same draws for a given seed.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .seeding import DOMAIN_LEVEL, DOMAIN_POPULATION_INIT, substream
from .series import LevelSeries
from .validation import check_finite_scalar, check_non_negative, check_positive_int

# Defensive bound on the closed-form attempt index. A resolution beyond
# this many attempts indicates pathological parameters, never a valid
# simulation state.
ATTEMPT_CAP = 10**6


class AttemptCapExceeded(RuntimeError):
    """A player's attempt count exceeded the defensive cap.

    Reachable only through pathological parameter combinations (for
    example persistence disabled while gamma is too small to ever close
    the skill gap). Treated as an internal error; the fitting objective
    converts it into a finite penalty.
    """


@dataclass(frozen=True)
class Player:
    """One player's persistent attributes."""

    skill: float
    persistence: float
    boredom: float

    def __post_init__(self):
        for name in ("skill", "persistence", "boredom"):
            check_finite_scalar(getattr(self, name), name)


class Population:
    """Immutable collection of players, stored as an (m, 3) float array.

    Columns are skill, persistence, boredom. The backing array is
    read-only; all simulation operations return new populations.
    """

    __slots__ = ("_attrs",)

    COLUMNS = ("skill", "persistence", "boredom")

    def __init__(self, attributes):
        arr = np.array(attributes, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValueError(f"population attributes must have shape (m, 3), got {arr.shape}")
        if arr.size and not np.all(np.isfinite(arr)):
            raise ValueError("population attributes must be finite")
        arr.setflags(write=False)
        self._attrs = arr

    @classmethod
    def from_players(cls, players) -> "Population":
        rows = [(p.skill, p.persistence, p.boredom) for p in players]
        return cls(np.array(rows, dtype=np.float64).reshape(len(rows), 3))

    @classmethod
    def empty(cls) -> "Population":
        return cls(np.empty((0, 3), dtype=np.float64))

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "Population":
        # Internal no-copy constructor for arrays the simulation kernel
        # just produced (fresh allocation, finiteness inherited from a
        # validated input population).
        pop = cls.__new__(cls)
        arr.setflags(write=False)
        pop._attrs = arr
        return pop

    @property
    def attributes(self) -> np.ndarray:
        """Read-only (m, 3) view: columns skill, persistence, boredom."""
        return self._attrs

    @property
    def skill(self) -> np.ndarray:
        return self._attrs[:, 0]

    @property
    def persistence(self) -> np.ndarray:
        return self._attrs[:, 1]

    @property
    def boredom(self) -> np.ndarray:
        return self._attrs[:, 2]

    @property
    def size(self) -> int:
        return self._attrs.shape[0]

    def __len__(self) -> int:
        return self.size

    def players(self):
        """Iterate players as Player records (test/debug convenience)."""
        for row in self._attrs:
            yield Player(float(row[0]), float(row[1]), float(row[2]))

    def __repr__(self) -> str:
        return f"Population(size={self.size})"


@dataclass(frozen=True)
class PopulationParams:
    """Normal-distribution parameters for the initial population."""

    mean_skill: float = 0.5
    std_skill: float = 0.1
    mean_persistence: float = 3.0
    std_persistence: float = 1.0
    mean_boredom: float = 0.0
    std_boredom: float = 0.1

    def __post_init__(self):
        for name in ("mean_skill", "mean_persistence", "mean_boredom"):
            check_finite_scalar(getattr(self, name), name)
        for name in ("std_skill", "std_persistence", "std_boredom"):
            check_non_negative(getattr(self, name), name)


@dataclass(frozen=True)
class SimParams:
    """The 10 scalar simulation parameters.

    Six describe the initial population; the other four are the per
    level draw widths (alpha for skill, beta for persistence, theta for
    boredom) and the per-attempt learning increment gamma.
    """

    population: PopulationParams
    alpha: float = 0.1
    beta: float = 0.1
    theta: float = 0.1
    gamma: float = 0.01

    def __post_init__(self):
        if not isinstance(self.population, PopulationParams):
            raise TypeError("population must be a PopulationParams")
        for name in ("alpha", "beta", "theta", "gamma"):
            check_non_negative(getattr(self, name), name)


@dataclass(frozen=True)
class AblationFlags:
    """Switches that disable individual model mechanisms.

    All false reproduces the full model exactly.
    """

    disable_boredom: bool = False
    disable_persistence: bool = False
    disable_learning: bool = False
    disable_draw_noise: bool = False


FULL_MODEL = AblationFlags()


@dataclass(frozen=True)
class LevelOutcome:
    """Result of simulating one level.

    ``survivors`` is the population after churn removal and before
    resampling; ``evolved`` is the resampled, size-restored population
    that enters the next level. When ``depleted`` is true both are
    empty and resampling was skipped.
    """

    pass_rate: float
    churn_rate: float
    survivors: Population
    evolved: Population
    depleted: bool


@dataclass(frozen=True)
class PopulationStats:
    """Per-attribute mean and population (divisor N) standard deviation."""

    mean_skill: float
    std_skill: float
    mean_persistence: float
    std_persistence: float
    mean_boredom: float
    std_boredom: float


@dataclass(frozen=True)
class ProgressionResult:
    """Result of simulating a whole level progression.

    ``series`` holds one (pass_rate, churn_rate) entry per simulated
    level. If the population depleted at level index ``depleted_at``,
    the series includes that level's outcome and stops there; levels
    after it were not simulated. ``stats_before`` records the
    population entering each simulated level, aligned with the series.
    """

    series: LevelSeries
    stats_before: tuple
    final_population: Population
    depleted: bool
    depleted_at: int = None
    n_levels_requested: int = 0

    @property
    def n_levels_simulated(self) -> int:
        return len(self.series)


def init_population(params: PopulationParams, size: int, seed: int) -> Population:
    """Draw an initial population of `size` players.

    Each attribute is sampled independently from its normal
    distribution; a zero standard deviation yields the mean exactly.
    Deterministic for a fixed seed.
    """
    if not isinstance(params, PopulationParams):
        raise TypeError("params must be a PopulationParams")
    size = check_positive_int(size, "size")
    rng = substream(seed, DOMAIN_POPULATION_INIT)
    z = rng.standard_normal((3, size))
    attrs = np.empty((size, 3), dtype=np.float64)
    attrs[:, 0] = params.mean_skill + params.std_skill * z[0]
    attrs[:, 1] = params.mean_persistence + params.std_persistence * z[1]
    attrs[:, 2] = params.mean_boredom + params.std_boredom * z[2]
    return Population(attrs)


@njit(cache=True)
def _resolve_level(attrs, difficulty, alpha, beta, theta, gamma, z, u,
                   disable_boredom, disable_persistence):
    """Closed-form resolution of every player's attempt loop for one level.

    Returns (pass_sum, n_churned, n_survivors, evolved, cap_hit) where
    pass_sum is the sum of 1/n_attempts over passing players and
    evolved[:n_survivors] are the survivors in stable order followed by
    resampled replicas up to the entry size.
    """
    m = attrs.shape[0]
    evolved = np.empty_like(attrs)
    keep = np.zeros(m, dtype=np.bool_)
    pass_sum = 0.0
    n_churned = 0
    cap_hit = False
    for p in range(m):
        s0 = attrs[p, 0] + alpha * z[0, p]
        if disable_persistence:
            t = np.inf
        else:
            t = attrs[p, 1] + beta * z[1, p]
        # First attempt index at which the pass check fires. np.ceil /
        # np.floor, not math.*: the math versions return int64 under
        # numba and overflow on infinite persistence.
        if s0 >= difficulty:
            n_pass = 1.0
        elif gamma > 0.0:
            n_pass = 1.0 + np.ceil((difficulty - s0) / gamma)
        else:
            n_pass = np.inf
        # First attempt index n with n > t; the churn check runs only
        # after a failed attempt, so it can never fire before attempt 1.
        n_quit = np.floor(t) + 1.0
        if n_quit < 1.0:
            n_quit = 1.0
        # Within one attempt the pass check precedes the churn check,
        # so a tie resolves as a pass.
        passed = n_pass <= n_quit
        resolution = n_pass if passed else n_quit
        if resolution > ATTEMPT_CAP:
            cap_hit = True
            continue
        if passed:
            pass_sum += 1.0 / n_pass
            churned = False
            if not disable_boredom:
                if theta * z[2, p] < attrs[p, 2]:
                    churned = True
        else:
            churned = True
        if churned:
            n_churned += 1
        else:
            keep[p] = True
    # Compact survivors to the front, preserving order.
    k = 0
    for p in range(m):
        if keep[p]:
            evolved[k, 0] = attrs[p, 0]
            evolved[k, 1] = attrs[p, 1]
            evolved[k, 2] = attrs[p, 2]
            k += 1
    if 0 < k < m:
        # Refill to size m with uniform picks among the k survivors.
        for i in range(m - k):
            src = int(u[i] * k)
            if src >= k:
                src = k - 1
            evolved[k + i, 0] = evolved[src, 0]
            evolved[k + i, 1] = evolved[src, 1]
            evolved[k + i, 2] = evolved[src, 2]
    return pass_sum, n_churned, k, evolved, cap_hit


def _check_sim_inputs(difficulty, population, params, flags):
    difficulty = check_finite_scalar(difficulty, "difficulty")
    if not 0.0 <= difficulty <= 1.0:
        raise ValueError(f"difficulty must lie in [0, 1], got {difficulty}")
    if not isinstance(population, Population):
        raise TypeError("population must be a Population")
    if population.size == 0:
        raise ValueError("population must be non-empty")
    if not isinstance(params, SimParams):
        raise TypeError("params must be a SimParams")
    if flags is None:
        flags = FULL_MODEL
    elif not isinstance(flags, AblationFlags):
        raise TypeError("flags must be an AblationFlags")
    return difficulty, flags


def _effective_scales(params: SimParams, flags: AblationFlags):
    alpha, beta = params.alpha, params.beta
    if flags.disable_draw_noise:
        alpha = beta = 0.0
    gamma = 0.0 if flags.disable_learning else params.gamma
    return alpha, beta, params.theta, gamma


def _run_level(difficulty, attrs, params, flags, rng):
    """Draw one level's randomness and run the kernel on raw arrays.

    Returns (pass_rate, churn_rate, n_survivors, evolved_attrs).
    """
    m = attrs.shape[0]
    z = rng.standard_normal((3, m))
    u = rng.random(m)
    alpha, beta, theta, gamma = _effective_scales(params, flags)
    pass_sum, n_churned, k, evolved, cap_hit = _resolve_level(
        attrs, difficulty, alpha, beta, theta, gamma, z, u,
        flags.disable_boredom, flags.disable_persistence)
    if cap_hit:
        raise AttemptCapExceeded(
            f"a player needed more than {ATTEMPT_CAP} attempts to resolve "
            f"(difficulty={difficulty}, gamma={gamma})")
    return pass_sum / m, n_churned / m, k, evolved


def simulate_level(difficulty, population: Population, params: SimParams,
                   flags: AblationFlags = None, seed: int = 0) -> LevelOutcome:
    """Simulate every player's attempt loop on one level.

    Returns the level's pass rate (mean of 1/n_attempts over passing
    players, zero contribution from churned ones), its churn rate
    (churned count over entry size), the surviving population, and the
    evolved population resampled back to the entry size. If every
    player churned, ``depleted`` is set and both populations are empty.
    """
    difficulty, flags = _check_sim_inputs(difficulty, population, params, flags)
    rng = substream(seed, DOMAIN_LEVEL)
    pass_rate, churn_rate, k, evolved = _run_level(
        difficulty, population.attributes, params, flags, rng)
    if k == 0:
        survivors = Population.empty()
        return LevelOutcome(pass_rate, churn_rate, survivors, survivors, True)
    survivors = Population(evolved[:k])
    return LevelOutcome(pass_rate, churn_rate, survivors, Population._wrap(evolved), False)


def simulate_progression(difficulties, initial_population: Population,
                         params: SimParams, flags: AblationFlags = None,
                         seed: int = 0, collect_stats: bool = True) -> ProgressionResult:
    """Simulate a sequence of levels, feeding each evolved population forward.

    Level i draws from the sub-stream (seed, level domain, i), so each
    level's randomness depends only on the master seed and the level
    index. Population statistics are recorded before each simulated
    level unless ``collect_stats`` is false (the fitting objective
    skips them for speed). On depletion the series stops after the
    depleting level and the remaining levels are not simulated.
    """
    difficulties = np.asarray(difficulties, dtype=np.float64)
    if difficulties.ndim != 1:
        raise ValueError(f"difficulties must be 1-D, got shape {difficulties.shape}")
    if difficulties.size and not np.all(np.isfinite(difficulties)):
        raise ValueError("difficulties must be finite")
    if np.any(difficulties < 0) or np.any(difficulties > 1):
        raise ValueError("difficulties must lie in [0, 1]")
    if not isinstance(initial_population, Population):
        raise TypeError("initial_population must be a Population")
    if initial_population.size == 0:
        raise ValueError("initial_population must be non-empty")
    if not isinstance(params, SimParams):
        raise TypeError("params must be a SimParams")
    if flags is None:
        flags = FULL_MODEL
    elif not isinstance(flags, AblationFlags):
        raise TypeError("flags must be an AblationFlags")

    n = difficulties.size
    pass_rates = np.empty(n, dtype=np.float64)
    churn_rates = np.empty(n, dtype=np.float64)
    stats = []
    attrs = initial_population.attributes
    depleted = False
    depleted_at = None
    simulated = 0
    for i in range(n):
        if collect_stats:
            stats.append(_stats_of(attrs))
        rng = substream(seed, DOMAIN_LEVEL, i)
        pass_rates[i], churn_rates[i], k, evolved = _run_level(
            float(difficulties[i]), attrs, params, flags, rng)
        simulated = i + 1
        if k == 0:
            depleted = True
            depleted_at = i
            attrs = np.empty((0, 3), dtype=np.float64)
            break
        attrs = evolved
    series = LevelSeries(pass_rates[:simulated], churn_rates[:simulated])
    return ProgressionResult(
        series=series,
        stats_before=tuple(stats),
        final_population=Population._wrap(attrs),
        depleted=depleted,
        depleted_at=depleted_at,
        n_levels_requested=n,
    )


def _stats_of(attrs: np.ndarray) -> PopulationStats:
    means = attrs.mean(axis=0)
    stds = attrs.std(axis=0)  # divisor N
    return PopulationStats(
        mean_skill=float(means[0]), std_skill=float(stds[0]),
        mean_persistence=float(means[1]), std_persistence=float(stds[1]),
        mean_boredom=float(means[2]), std_boredom=float(stds[2]),
    )


def population_stats(population: Population) -> PopulationStats:
    """Mean and population standard deviation of each attribute."""
    if not isinstance(population, Population):
        raise TypeError("population must be a Population")
    if population.size == 0:
        raise ValueError("population must be non-empty")
    return _stats_of(population.attributes)
