"""Capacity-limited ideal channel: delivers a frame iff its payload fits."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .allocation import budget_from_fraction
from .codec import EncodedFrame
from .errors import CapacityError


@dataclass(frozen=True)
class ChannelConfig:
    """Per-frame byte budget, absolute or as a fraction of the all-max payload."""

    budget: Optional[int] = None
    rate: Optional[Fraction | float | str] = None

    def __post_init__(self):
        if (self.budget is None) == (self.rate is None):
            raise ValueError("give exactly one of budget or rate")
        if self.budget is not None and self.budget < 0:
            raise ValueError("budget must be >= 0")
        if self.rate is not None:
            frac = Fraction(str(self.rate)) if not isinstance(self.rate, Fraction) else self.rate
            if frac < 0 or frac > 1:
                raise ValueError(f"rate fraction {frac} outside [0, 1]")

    def resolve_budget(self, patch_count: int, max_rate: int) -> int:
        if self.budget is not None:
            return self.budget
        return budget_from_fraction(self.rate, patch_count, max_rate)


def transmit(frame: EncodedFrame, cfg: ChannelConfig) -> EncodedFrame:
    """Deliver the frame unchanged if the payload section fits the budget.

    The channel is lossless and order-preserving; only the payload section
    counts against the budget (the header does not).
    """
    budget = cfg.resolve_budget(frame.levels.shape[0], frame.table.max_rate)
    if frame.payload_size > budget:
        raise CapacityError(frame.payload_size, budget)
    return frame
