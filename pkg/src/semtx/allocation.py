"""Per-patch resolution-level assignment under a total byte budget.

Patches are scored by averaging the normalized relevance map, then visited
in score order (ties broken by lower row-major index); each visit grabs the
largest affordable level. The result is feasible, score-monotone, and
Pareto-maximal: no single patch can be bumped one level within the leftover
budget unless everything is already at the top level.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .fusion import RelevanceMap

DEFAULT_RATES = (0, 12, 24, 48, 192)


@dataclass(frozen=True)
class PatchGrid:
    """Non-overlapping p x p patch partition of an image."""

    patch_size: int
    rows: int
    cols: int

    def __post_init__(self):
        if self.patch_size <= 0 or self.rows <= 0 or self.cols <= 0:
            raise ValueError("patch grid dims must be positive")

    @classmethod
    def for_image(cls, height: int, width: int, patch_size: int = 8) -> "PatchGrid":
        if height % patch_size or width % patch_size:
            raise ValueError(
                f"image {width}x{height} not divisible by patch size {patch_size}"
            )
        return cls(patch_size, height // patch_size, width // patch_size)

    @property
    def patch_count(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class RateTable:
    """Bytes-per-patch for each resolution level, strictly ascending from 0."""

    rates: tuple[int, ...] = DEFAULT_RATES

    def __post_init__(self):
        if len(self.rates) == 0:
            raise ValueError("rate table is empty")
        if self.rates[0] != 0:
            raise ValueError("rate table must start at 0")
        if any(b <= a for a, b in zip(self.rates, self.rates[1:])):
            raise ValueError("rate table must be strictly ascending")

    @property
    def levels(self) -> int:
        return len(self.rates)

    @property
    def max_rate(self) -> int:
        return self.rates[-1]


@dataclass(frozen=True)
class PatchScores:
    """Mean relevance per patch, row-major patch order."""

    scores: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scores)
        if s.dtype != np.float32 or s.ndim != 1:
            raise ValueError(f"scores must be a float32 vector, got {s.dtype}{s.shape}")


@dataclass(frozen=True)
class AllocationPlan:
    """Level index per patch plus budget accounting."""

    levels: np.ndarray
    table: RateTable
    total: int
    budget: int

    @property
    def patch_count(self) -> int:
        return self.levels.shape[0]

    def level_counts(self) -> list[int]:
        return np.bincount(self.levels, minlength=self.table.levels).tolist()


@dataclass(frozen=True)
class PlanStats:
    counts: list[int]
    total: int
    budget: int
    utilization: float


def patch_scores(map_: RelevanceMap, grid: PatchGrid) -> PatchScores:
    """Average the normalized relevance map over each patch."""
    if not map_.normalized:
        raise ValueError("patch scoring expects a normalized relevance map")
    h, w = map_.shape
    p = grid.patch_size
    if h != grid.rows * p or w != grid.cols * p:
        raise ValueError(
            f"map {w}x{h} does not cover a {grid.cols}x{grid.rows} grid of {p}px patches"
        )
    blocks = map_.values.reshape(grid.rows, p, grid.cols, p)
    means = blocks.mean(axis=(1, 3), dtype=np.float64)
    return PatchScores(means.reshape(-1).astype(np.float32))


def allocate(scores: PatchScores, table: RateTable, budget: int) -> AllocationPlan:
    """Greedy max-affordable assignment in descending score order."""
    if budget < 0:
        raise ValueError("budget must be >= 0")
    s = scores.scores
    order = np.argsort(-s, kind="stable")  # stable: equal scores keep index order
    levels = np.zeros(s.shape[0], dtype=np.uint8)
    remaining = int(budget)
    rates = table.rates
    for idx in order:
        lvl = bisect_right(rates, remaining) - 1
        levels[idx] = lvl
        remaining -= rates[lvl]
    total = int(budget) - remaining
    return AllocationPlan(levels=levels, table=table, total=total, budget=int(budget))


def uniform_plan(grid_or_count, table: RateTable, level: int, budget: int | None = None) -> AllocationPlan:
    """Assign one level to every patch; baseline for guided-vs-uniform comparisons."""
    count = grid_or_count.patch_count if isinstance(grid_or_count, PatchGrid) else int(grid_or_count)
    if not 0 <= level < table.levels:
        raise ValueError(f"level {level} outside table with {table.levels} levels")
    total = table.rates[level] * count
    budget = total if budget is None else int(budget)
    if total > budget:
        raise ValueError(f"uniform level {level} needs {total} bytes, budget is {budget}")
    return AllocationPlan(
        levels=np.full(count, level, dtype=np.uint8), table=table, total=total, budget=budget
    )


def plan_stats(plan: AllocationPlan) -> PlanStats:
    counts = plan.level_counts()
    utilization = plan.total / plan.budget if plan.budget > 0 else 0.0
    return PlanStats(counts=counts, total=plan.total, budget=plan.budget, utilization=utilization)


def budget_from_fraction(rho: Fraction | float | str, patch_count: int, max_rate: int) -> int:
    """Map a channel-rate fraction to a byte budget, rounding down.

    The fraction is taken exactly (strings and floats go through Fraction of
    their decimal form) so that e.g. 0.7 of 460800 is 322560, not a float
    artifact below it.
    """
    frac = rho if isinstance(rho, Fraction) else Fraction(str(rho))
    if frac < 0 or frac > 1:
        raise ValueError(f"rate fraction {frac} outside [0, 1]")
    return int(frac * patch_count * max_rate)  # Fraction int() truncates toward zero
