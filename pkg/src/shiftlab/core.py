"""Domain types shared by every analysis.

All public indices are 1-based. A segmentation with breaks ``t_1 < ... < t_K``
splits ``1..T`` into half-open segments ``[t_k, t_{k+1})`` with sentinels
``t_0 = 1`` and ``t_{K+1} = T + 1``, so every observation belongs to exactly
one segment.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import EmptySeries, InputError, InvalidSegmentation, NonFiniteValue

MAX_SEED = 2**64 - 1


@dataclass(frozen=True, eq=False)
class TimeSeries:
    values: np.ndarray
    start_date: dt.date | None = None
    label: str = ""

    def __post_init__(self):
        arr = np.array(self.values, dtype=float).ravel()
        if arr.size == 0:
            raise EmptySeries()
        bad = np.flatnonzero(~np.isfinite(arr))
        if bad.size:
            raise NonFiniteValue(int(bad[0]) + 1)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.size

    @property
    def T(self) -> int:
        return self.values.size

    def at(self, t: int) -> float:
        """Observation ``m_t`` using 1-based ``t``."""
        if not 1 <= t <= self.T:
            raise IndexError(t)
        return float(self.values[t - 1])

    def date_of(self, t: int) -> dt.date | None:
        if self.start_date is None:
            return None
        return self.start_date + dt.timedelta(days=t - 1)


def make_series(values: Sequence[float], start_date: dt.date | None = None, label: str = "") -> TimeSeries:
    return TimeSeries(values, start_date=start_date, label=label)


@dataclass(frozen=True)
class Segmentation:
    breaks: tuple[int, ...]
    series_len: int

    def __post_init__(self):
        breaks = tuple(int(b) for b in self.breaks)
        T = int(self.series_len)
        if T < 1:
            raise InvalidSegmentation(f"series length must be positive, got {T}")
        for b in breaks:
            if not 1 < b < T:
                raise InvalidSegmentation(f"break {b} outside the open range (1, {T})")
        if any(b2 <= b1 for b1, b2 in zip(breaks, breaks[1:])):
            raise InvalidSegmentation(f"breaks must be strictly increasing: {breaks}")
        object.__setattr__(self, "breaks", breaks)
        object.__setattr__(self, "series_len", T)

    @property
    def K(self) -> int:
        return len(self.breaks)

    def boundaries(self) -> tuple[int, ...]:
        return (1,) + self.breaks + (self.series_len + 1,)

    def segments(self) -> Iterator[tuple[int, int]]:
        """Yield ``(start, end_exclusive)`` pairs, 1-based."""
        bounds = self.boundaries()
        yield from zip(bounds[:-1], bounds[1:])

    def lengths(self) -> list[int]:
        return [e - s for s, e in self.segments()]


@dataclass(frozen=True)
class EventRecord:
    date: dt.date
    location: tuple[float, float] | None = None
    attributes: Mapping[str, str] = field(default_factory=dict)
    weight: float = 1.0

    def __post_init__(self):
        if not isinstance(self.date, dt.date):
            raise InputError(f"event date must be a calendar date, got {self.date!r}")
        for k, v in self.attributes.items():
            if not isinstance(v, str) or not v:
                raise InputError(f"attribute {k!r} has an empty or non-string level {v!r}")
        if not (self.weight > 0 and math.isfinite(self.weight)):
            raise InputError(f"event weight must be positive and finite, got {self.weight!r}")
        if self.location is not None:
            x, y = self.location
            if not (math.isfinite(x) and math.isfinite(y)):
                raise InputError(f"non-finite event location {self.location!r}")
            object.__setattr__(self, "location", (float(x), float(y)))
        object.__setattr__(self, "attributes", dict(self.attributes))


@dataclass(frozen=True)
class RngSeed:
    seed: int

    def __post_init__(self):
        if not 0 <= int(self.seed) <= MAX_SEED:
            raise InputError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        object.__setattr__(self, "seed", int(self.seed))

    def sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.seed)

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(self.sequence())

    def spawn(self, n: int) -> list[np.random.Generator]:
        """Independent per-replicate generators; replicate i is the same regardless of evaluation order."""
        return [np.random.default_rng(s) for s in self.sequence().spawn(n)]


def as_seed(seed: int | RngSeed) -> RngSeed:
    return seed if isinstance(seed, RngSeed) else RngSeed(seed)
