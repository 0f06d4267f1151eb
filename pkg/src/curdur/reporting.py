"""Observation model for heaped, multi-unit duration reports.

A survey answer is a pair (z, unit).  Each pair maps to an integer day
interval; the probability of observing the pair is the duration
distribution summed over that interval.  Day reports on preferred round
values (multiples of 7 or 30) are treated as heaped: the true day may lie
anywhere within a small window around the reported value.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable

import numpy as np

from .errors import ConfigurationError, OutOfWindowError
from .window import LAST_DAY, NUM_DAYS

YEAR_INTERVAL_START = 365 - 31
DEFAULT_HEAP_DAYS = (7, 14, 21, 28, 30, 60, 90)


class Unit(IntEnum):
    """Reporting unit codes as used in survey extracts."""

    DAY = 1
    WEEK = 2
    MONTH = 3
    YEAR = 4


@dataclass(frozen=True)
class HeapSet:
    """Preferred round day values and the half-width of their heap window."""

    days: tuple[int, ...] = DEFAULT_HEAP_DAYS
    halfwidth: int = 2

    def __post_init__(self):
        days = tuple(sorted(int(d) for d in self.days))
        object.__setattr__(self, "days", days)
        if self.halfwidth < 0:
            raise ConfigurationError(f"halfwidth must be >= 0, got {self.halfwidth}")
        if any(d < self.halfwidth for d in days):
            raise ConfigurationError(
                f"heap days {days} must all be >= halfwidth {self.halfwidth} "
                "so heap intervals stay non-negative"
            )

    def __contains__(self, z: int) -> bool:
        return int(z) in self.days


DEFAULT_HEAP = HeapSet()


@dataclass(frozen=True)
class ReportedDuration:
    """One survey response: reported value plus reporting unit."""

    z: int
    unit: Unit

    def __post_init__(self):
        z = int(self.z)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "unit", Unit(self.unit))
        if z < 0:
            raise ValueError(f"reported value must be non-negative, got {z}")
        if self.unit == Unit.YEAR and z != 1:
            raise ValueError(
                f"year reports are only representable as z = 1 within the "
                f"two-year window, got z = {z}"
            )


@dataclass(frozen=True)
class ReportedDataset:
    """All survey responses, plus a compressed multiset for fast likelihoods."""

    records: tuple[ReportedDuration, ...]
    counts: dict = field(init=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "counts", dict(Counter(self.records)))

    @classmethod
    def from_records(cls, records: Iterable[ReportedDuration]) -> "ReportedDataset":
        return cls(records=tuple(records))

    def __len__(self) -> int:
        return len(self.records)


def day_interval(
    record: ReportedDuration, heap: HeapSet | None = None
) -> tuple[int, int]:
    """Integer day interval [lo, hi] implied by one report.

    Days are exact unless the value sits on a heap day; weeks, months and
    years map to their fixed ranges.  The upper end is clamped to the last
    observable day; an interval lying entirely beyond it is an error
    (ingestion should have excluded the record).
    """
    heap = heap if heap is not None else DEFAULT_HEAP
    z = record.z
    if record.unit == Unit.DAY:
        if z in heap:
            lo, hi = z - heap.halfwidth, z + heap.halfwidth
        else:
            lo, hi = z, z
    elif record.unit == Unit.WEEK:
        lo, hi = 7 * z, 7 * z + 6
    elif record.unit == Unit.MONTH:
        lo, hi = 30 * z + 1, 30 * z + 30
    else:
        lo, hi = YEAR_INTERVAL_START, LAST_DAY
    if lo > LAST_DAY:
        raise OutOfWindowError(
            f"report {record} implies days [{lo}, {hi}], entirely beyond "
            f"day {LAST_DAY}"
        )
    return lo, min(hi, LAST_DAY)


def reported_prob(phi, record: ReportedDuration, heap: HeapSet | None = None) -> float:
    """Probability of one report under a duration distribution.

    ``phi`` may be a TslsDistribution or a plain probability vector over
    days 0 .. 729.  The sum is accumulated term by term, matching a plain
    enumeration over the day interval exactly.
    """
    vec = getattr(phi, "phi", phi)
    vec = np.asarray(vec, dtype=float)
    lo, hi = day_interval(record, heap)
    total = 0.0
    for y in range(lo, hi + 1):
        total += float(vec[y])
    return total


def spread_mass(dataset: ReportedDataset, heap: HeapSet | None = None) -> np.ndarray:
    """Per-day histogram weights with each report's mass spread evenly.

    Every record contributes 1 / (interval width) to each day of its
    interval, so the output sums to the number of records.
    """
    weights = np.zeros(NUM_DAYS)
    for record, n in dataset.counts.items():
        lo, hi = day_interval(record, heap)
        weights[lo : hi + 1] += n / (hi - lo + 1)
    return weights
