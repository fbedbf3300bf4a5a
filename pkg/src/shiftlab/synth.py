"""Synthetic generators with planted effects, for tests and experiment scripts."""

from __future__ import annotations

import datetime as dt
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import EventRecord

Rate = float | Callable[[dt.date], float]


def piecewise_constant(levels: Sequence[float], lengths: Sequence[int], sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Gaussian noise around a step function; breaks sit at ``cumsum(lengths)[:-1] + 1`` (1-based)."""
    mean = np.repeat(np.asarray(levels, dtype=float), lengths)
    return mean + sigma * rng.standard_normal(mean.size)


def planted_breaks(lengths: Sequence[int]) -> list[int]:
    return [int(b) + 1 for b in np.cumsum(lengths)[:-1]]


def _rate(r: Rate, day: dt.date) -> float:
    return float(r(day)) if callable(r) else float(r)


def poisson_events(
    start: dt.date,
    days: int,
    rates: Mapping[str, Rate],
    factor: str,
    rng: np.random.Generator,
    location: Callable[[str, dt.date, np.random.Generator], tuple[float, float]] | None = None,
    extra: Callable[[str, dt.date, np.random.Generator], Mapping[str, str]] | None = None,
) -> list[EventRecord]:
    """Daily Poisson arrivals per group.

    ``rates[g]`` is events per day, constant or a function of the date.
    """
    events = []
    for d in range(days):
        day = start + dt.timedelta(days=d)
        for g in sorted(rates):
            k = int(rng.poisson(_rate(rates[g], day)))
            for _ in range(k):
                attrs = {factor: g}
                if extra is not None:
                    attrs.update(extra(g, day, rng))
                loc = location(g, day, rng) if location is not None else None
                events.append(EventRecord(day, loc, attrs))
    return events


def step_rate(before: float, after: float, anchor: dt.date) -> Callable[[dt.date], float]:
    return lambda day: before if day < anchor else after


def share_shift_rates(
    total_before: float, total_after: float, share_before: float, share_after: float, anchor: dt.date
) -> dict[str, Callable[[dt.date], float]]:
    """Two groups, ``focus`` and ``rest``, whose share of the total moves at the anchor."""
    return {
        "focus": step_rate(total_before * share_before, total_after * share_after, anchor),
        "rest": step_rate(total_before * (1 - share_before), total_after * (1 - share_after), anchor),
    }


def lockdown_scenario(seed: int = 0, anchor: dt.date = dt.date(2020, 3, 19), days_each_side: int = 90) -> list[EventRecord]:
    """Accident-like events from ``days_each_side`` before the prior-year anchor
    to ``days_each_side`` after ``anchor``.

    Only the current year has a lockdown. At the anchor, total volume drops by
    40%, the ``10-19`` age band loses share, the spatial hot spot moves from
    (0, 0) to (6, -4), and fatal accidents keep a constant rate while others fall.
    """
    rng = np.random.default_rng(seed)
    age_share = {"10-19": 0.12, "20-29": 0.30, "30-39": 0.28, "40-69": 0.25, "70+": 0.05}
    age_share_after = {"10-19": 0.08, "20-29": 0.31, "30-39": 0.30, "40-69": 0.26, "70+": 0.05}
    modes = ("none", "pedestrian", "motorist")
    events: list[EventRecord] = []
    prior = anchor.replace(year=anchor.year - 1)
    start = prior - dt.timedelta(days=days_each_side)
    n_days = (anchor - start).days + days_each_side
    for d in range(n_days):
        day = start + dt.timedelta(days=d)
        after = day >= anchor
        total = 40.0 * (0.6 if after else 1.0)
        shares = age_share_after if after else age_share
        for band, sh in shares.items():
            for _ in range(int(rng.poisson(total * sh))):
                if after:
                    loc = (rng.normal(6.0, 1.5), rng.normal(-4.0, 1.5))
                else:
                    loc = (rng.normal(0.0, 1.5), rng.normal(0.0, 1.5))
                attrs = {
                    "age": band,
                    "gender": str(rng.choice(["female", "male"], p=[0.40, 0.60] if after else [0.45, 0.55])),
                    "severity": str(rng.choice(["no_injury", "injury"], p=[0.75, 0.25] if after else [0.7, 0.3])),
                    "mode": str(rng.choice(modes, p=[0.6, 0.15, 0.25])),
                }
                events.append(EventRecord(day, (float(loc[0]), float(loc[1])), attrs))
        for _ in range(int(rng.poisson(0.5))):
            loc = (rng.normal(3.0, 3.0), rng.normal(0.0, 3.0))
            attrs = {"age": "40-69", "gender": "male", "severity": "fatal", "mode": str(rng.choice(modes))}
            events.append(EventRecord(day, (float(loc[0]), float(loc[1])), attrs))
    events.sort(key=lambda e: e.date)
    return events
