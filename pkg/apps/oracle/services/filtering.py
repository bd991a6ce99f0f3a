"""
Sliding time-window filter and the minimum-count retry policy.

From the top-t revealed results, keep the contiguous run (in timestamp order)
whose timestamp range is at most w, with the most members; ties go to the
smallest population variance of timestamps, then to the earliest window.

Timestamps are compared as exact rationals of their float values. Every
candidate with the maximum count is the widest window ending at some result,
so a single two-pointer pass over the sorted results visits all of them.

The published pseudocode lets any later equal-count window replace the current
best, which ignores the variance requirement. Replacement here needs a strictly
larger count or, at equal count, a strictly smaller variance.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, List, Optional, Sequence, Union

from apps.oracle.exceptions import ContractViolation
from apps.oracle.services.selection import CostCounter


GROWTH_FACTOR = 1.5


@dataclass(frozen=True)
class TimedResult:
    node_id: str
    value: float
    timestamp: float
    priority: Any = None
    attestation: Any = field(default=None, repr=False)

    def __post_init__(self):
        if self.timestamp < 0:
            raise ContractViolation(f"timestamp must be >= 0, got {self.timestamp}")


@dataclass(frozen=True)
class FilterPolicy:
    window_width: float
    min_count: int = 1
    growth_factor: float = GROWTH_FACTOR

    def __post_init__(self):
        if self.window_width <= 0:
            raise ContractViolation("window_width must be > 0")
        if self.min_count < 1:
            raise ContractViolation("min_count must be >= 1")


@dataclass(frozen=True)
class FilterDecision:
    kept: tuple
    dropped: tuple
    window_start: float
    window_end: float
    variance: Fraction

    def to_log(self, task_id: str) -> dict:
        return {
            'task_id': task_id,
            'window_start': self.window_start,
            'window_end': self.window_end,
            'kept_nodes': [r.node_id for r in self.kept],
            'dropped_nodes': [r.node_id for r in self.dropped],
        }


@dataclass(frozen=True)
class Accept:
    count: int


@dataclass(frozen=True)
class Retry:
    new_width: float


def sort_by_timestamp(results: Sequence[TimedResult]) -> List[TimedResult]:
    return sorted(results, key=lambda r: (r.timestamp, r.node_id))


def population_variance(values: Sequence[Fraction]) -> Fraction:
    n = len(values)
    mean = sum(values, Fraction(0)) / n
    return sum(((v - mean) ** 2 for v in values), Fraction(0)) / n


def decide_window(results: Sequence[TimedResult], w: float,
                  counter: Optional[CostCounter] = None) -> FilterDecision:
    if not results:
        raise ContractViolation("filter_window needs at least one result")
    if w <= 0:
        raise ContractViolation("window width must be > 0")

    ordered = sort_by_timestamp(results)
    stamps = [Fraction(r.timestamp) for r in ordered]
    width = Fraction(w)

    best = None  # (count, variance, start, end)
    left = 0
    running_sum = Fraction(0)
    running_sq = Fraction(0)
    for right, stamp in enumerate(stamps):
        running_sum += stamp
        running_sq += stamp * stamp
        while stamp - stamps[left] > width:
            running_sum -= stamps[left]
            running_sq -= stamps[left] * stamps[left]
            left += 1
            if counter is not None:
                counter.tick()
        count = right - left + 1
        mean = running_sum / count
        variance = running_sq / count - mean * mean
        if counter is not None:
            counter.tick()
        if (best is None or count > best[0]
                or (count == best[0] and variance < best[1])):
            best = (count, variance, left, right)

    _, variance, start, end = best
    kept = tuple(ordered[start:end + 1])
    dropped = tuple(ordered[:start] + ordered[end + 1:])
    return FilterDecision(
        kept=kept,
        dropped=dropped,
        window_start=ordered[start].timestamp,
        window_end=ordered[end].timestamp,
        variance=variance,
    )


def filter_window(results: Sequence[TimedResult], w: float,
                  counter: Optional[CostCounter] = None) -> List[TimedResult]:
    return list(decide_window(results, w, counter).kept)


def apply_retry_policy(filtered_count: int, policy: FilterPolicy) -> Union[Accept, Retry]:
    if filtered_count >= policy.min_count:
        return Accept(count=filtered_count)
    return Retry(new_width=policy.window_width * policy.growth_factor)
