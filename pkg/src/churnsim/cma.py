"""Covariance matrix adaptation evolution strategy, written from scratch.

Implements the standard (mu/mu_w, lambda) strategy: rank-mu and rank-one
covariance updates, cumulative step-size adaptation, and weighted
recombination of the best half of each generation. The implementation
is self-contained on purpose; the optimizer is the part of the fitting
protocol whose exact behavior the rest of the toolkit depends on.

Minimization only. Candidates are evaluated serially and reduced in
candidate-index order, so results are deterministic for a fixed seed.
"""

from dataclasses import dataclass

import numpy as np

from .seeding import DOMAIN_OPTIMIZER, substream
from .validation import check_positive, check_positive_int, check_vector


class ObjectiveError(RuntimeError):
    """The objective raised or returned a non-finite value."""


class CovarianceError(RuntimeError):
    """The adapted covariance matrix stopped being positive definite."""


@dataclass(frozen=True)
class OptimizerConfig:
    """Search settings.

    ``no_improvement_generations`` is the stopping patience: the run
    ends once that many consecutive generations fail to produce a new
    best-ever value. ``f_target`` optionally stops the run early once
    the best value reaches the target.
    """

    population_size: int = 120
    no_improvement_generations: int = 100
    max_evaluations: int = 10**6
    initial_step_size: float = 0.3
    seed: int = 0
    f_target: float = None

    def __post_init__(self):
        check_positive_int(self.population_size, "population_size")
        if self.population_size < 4:
            raise ValueError(f"population_size must be >= 4, got {self.population_size}")
        check_positive_int(self.no_improvement_generations, "no_improvement_generations")
        check_positive_int(self.max_evaluations, "max_evaluations")
        check_positive(self.initial_step_size, "initial_step_size")
        if self.f_target is not None and not np.isfinite(self.f_target):
            raise ValueError(f"f_target must be finite or None, got {self.f_target}")


@dataclass(frozen=True)
class OptResult:
    """Best-ever point found and how the run ended."""

    best_raw_vector: np.ndarray
    best_value: float
    evaluations_used: int
    generations: int
    termination_reason: str  # "no-improvement" | "budget" | "tolerance"


class _Strategy:
    """CMA-ES state and per-generation update rules."""

    def __init__(self, x0, sigma0, lam):
        n = x0.shape[0]
        self.n = n
        self.lam = lam
        mu = lam // 2
        # Log-rank recombination weights over the better half.
        w = np.log((lam + 1) / 2.0) - np.log(np.arange(1, mu + 1))
        self.weights = w / w.sum()
        self.mueff = 1.0 / np.sum(self.weights**2)
        self.mu = mu

        m = self.mueff
        self.cc = (4.0 + m / n) / (n + 4.0 + 2.0 * m / n)
        self.cs = (m + 2.0) / (n + m + 5.0)
        self.c1 = 2.0 / ((n + 1.3) ** 2 + m)
        self.cmu = min(1.0 - self.c1, 2.0 * (m - 2.0 + 1.0 / m) / ((n + 2.0) ** 2 + m))
        self.damps = 1.0 + 2.0 * max(0.0, np.sqrt((m - 1.0) / (n + 1.0)) - 1.0) + self.cs
        self.chi_n = np.sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n))

        self.mean = x0.copy()
        self.sigma = sigma0
        self.cov = np.eye(n)
        self.ps = np.zeros(n)
        self.pc = np.zeros(n)
        self.generation = 0

    def sample(self, rng):
        """Draw one generation of candidates; returns (candidates, steps)."""
        eigvals, basis = np.linalg.eigh(self.cov)
        if eigvals[0] <= 0.0 or not np.all(np.isfinite(eigvals)):
            raise CovarianceError(
                f"covariance lost positive definiteness at generation "
                f"{self.generation} (min eigenvalue {eigvals[0]})")
        self._basis = basis
        self._scales = np.sqrt(eigvals)
        z = rng.standard_normal((self.lam, self.n))
        steps = (z * self._scales) @ basis.T  # rows: B @ (D * z_k)
        return self.mean + self.sigma * steps, steps

    def update(self, steps, order):
        """Adapt mean, paths, covariance, and step size from ranked steps."""
        self.generation += 1
        sel = steps[order[: self.mu]]
        y_w = self.weights @ sel
        self.mean = self.mean + self.sigma * y_w

        # C^{-1/2} y_w via the eigendecomposition used for sampling.
        c_invsqrt_y = (self._basis / self._scales) @ (self._basis.T @ y_w)
        self.ps = (1.0 - self.cs) * self.ps + np.sqrt(
            self.cs * (2.0 - self.cs) * self.mueff) * c_invsqrt_y
        ps_norm = np.linalg.norm(self.ps)
        hsig = ps_norm / np.sqrt(
            1.0 - (1.0 - self.cs) ** (2.0 * self.generation)) / self.chi_n < 1.4 + 2.0 / (self.n + 1.0)
        self.pc = (1.0 - self.cc) * self.pc + hsig * np.sqrt(
            self.cc * (2.0 - self.cc) * self.mueff) * y_w

        rank_one = np.outer(self.pc, self.pc)
        rank_mu = (sel * self.weights[:, None]).T @ sel
        # The (1 - hsig) term compensates the variance the stalled pc
        # update would otherwise lose.
        c1a = self.c1 * (1.0 - (1.0 - hsig) * self.cc * (2.0 - self.cc))
        cov = ((1.0 - c1a - self.cmu) * self.cov
               + self.c1 * rank_one
               + self.cmu * rank_mu)
        self.cov = (cov + cov.T) / 2.0
        self.sigma = self.sigma * np.exp(
            (self.cs / self.damps) * (ps_norm / self.chi_n - 1.0))


def _evaluate(objective, x, count):
    try:
        value = objective(np.array(x, copy=True))
    except Exception as exc:
        raise ObjectiveError(
            f"objective raised at evaluation {count}: {exc!r}") from exc
    value = float(value)
    if not np.isfinite(value):
        raise ObjectiveError(
            f"objective returned non-finite value {value} at evaluation {count}")
    return value


def minimize(objective, x0, config: OptimizerConfig = None) -> OptResult:
    """Minimize a black-box function over a real vector.

    Runs generations until the best-ever value has not decreased for
    ``no_improvement_generations`` consecutive generations, the
    evaluation budget cannot fit another generation, or ``f_target``
    is reached. Returns the best point ever evaluated (x0 itself is
    evaluated first, so the result is never worse than the start).
    """
    if config is None:
        config = OptimizerConfig()
    if not isinstance(config, OptimizerConfig):
        raise TypeError("config must be an OptimizerConfig")
    x0 = check_vector(x0, "x0")
    rng = substream(config.seed, DOMAIN_OPTIMIZER)
    strategy = _Strategy(x0, config.initial_step_size, config.population_size)

    evaluations = 0
    best_x = x0.copy()
    best_f = _evaluate(objective, x0, evaluations)
    evaluations += 1
    stale = 0
    reason = None

    if config.f_target is not None and best_f <= config.f_target:
        reason = "tolerance"

    while reason is None:
        if evaluations + config.population_size > config.max_evaluations:
            reason = "budget"
            break
        candidates, steps = strategy.sample(rng)
        values = np.empty(config.population_size)
        for i in range(config.population_size):
            values[i] = _evaluate(objective, candidates[i], evaluations)
            evaluations += 1
        order = np.argsort(values, kind="stable")
        strategy.update(steps, order)

        gen_best = order[0]
        if values[gen_best] < best_f:
            best_f = float(values[gen_best])
            best_x = candidates[gen_best].copy()
            stale = 0
        else:
            stale += 1
        if config.f_target is not None and best_f <= config.f_target:
            reason = "tolerance"
        elif stale >= config.no_improvement_generations:
            reason = "no-improvement"

    best_x.setflags(write=False)
    return OptResult(
        best_raw_vector=best_x,
        best_value=best_f,
        evaluations_used=evaluations,
        generations=strategy.generation,
        termination_reason=reason,
    )
