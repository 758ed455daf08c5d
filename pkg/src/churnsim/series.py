"""Per-level rate series shared by simulation, fitting, and evaluation."""

from dataclasses import dataclass, field

import numpy as np

from .validation import check_vector


@dataclass(frozen=True)
class LevelSeries:
    """Aligned per-level pass and churn rates for one level progression.

    Both arrays have one entry per level, in progression order. Rates
    live in [0, 1]. Used both for observed (ground-truth) rates and for
    simulated predictions. May be empty (a zero-level progression).
    """

    pass_rates: np.ndarray
    churn_rates: np.ndarray
    level_ids: np.ndarray = field(default=None)  # optional external ids
    role: str = None  # "truth" | "predicted" | None

    def __post_init__(self):
        p = check_vector(self.pass_rates, "pass_rates", allow_empty=True)
        c = check_vector(self.churn_rates, "churn_rates", allow_empty=True)
        for name, arr in (("pass_rates", p), ("churn_rates", c)):
            if arr.size and (arr.min() < 0 or arr.max() > 1):
                raise ValueError(f"{name} values must lie in [0, 1]")
        if p.shape != c.shape:
            raise ValueError(
                f"pass_rates and churn_rates must align, got {p.shape} vs {c.shape}"
            )
        p.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "pass_rates", p)
        object.__setattr__(self, "churn_rates", c)
        if self.level_ids is not None:
            ids = np.asarray(self.level_ids, dtype=np.int64)
            if ids.shape != p.shape:
                raise ValueError(f"level_ids must have shape {p.shape}, got {ids.shape}")
            if ids.size > 1 and not np.all(np.diff(ids) > 0):
                raise ValueError("level_ids must be strictly increasing")
            ids.setflags(write=False)
            object.__setattr__(self, "level_ids", ids)
        if self.role not in (None, "truth", "predicted"):
            raise ValueError(f"role must be 'truth', 'predicted', or None, got {self.role!r}")

    def __len__(self) -> int:
        return self.pass_rates.shape[0]

    def as_matrix(self) -> np.ndarray:
        """Stack into an (n_levels, 2) array: column 0 pass, column 1 churn."""
        return np.column_stack([self.pass_rates, self.churn_rates])
