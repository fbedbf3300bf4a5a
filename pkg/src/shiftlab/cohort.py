"""Before/after deltas of per-group event counts and shares.

For one factor (age band, race, gender, severity, ...) and one window length
``w``, events in ``[anchor - w, anchor)`` and ``[anchor, anchor + w)`` are
tallied per group. Counts are reported as daily means, shares as the group's
fraction of all events in the window. Giving a prior-year anchor subtracts
that year's same-window delta, which removes the seasonal part of the change.

Confidence intervals use a percentile bootstrap that resamples events within
each window independently. Each event is drawn a Poisson(1) number of times,
so window totals vary across replicates as they would under a Poisson
arrival process.
"""

from __future__ import annotations

import datetime as dt
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .changepoint import PenaltySpec, detect, noise_variance
from .core import EventRecord, RngSeed, as_seed, make_series
from .cost import CostModel
from .did import DidRecord
from .errors import AnalysisError, EmptyData, FactorMissing, InputError, WindowOutOfRange

DEFAULT_WINDOWS = (15, 30, 60)
TOTAL = "__total__"
MIN_GROUP_EVENTS = 5
MIN_BOOT = 200


@dataclass(frozen=True)
class WindowCounts:
    factor: str
    anchor: dt.date
    window_days: int
    groups: tuple[str, ...]
    before: np.ndarray  # weighted totals per group
    after: np.ndarray
    n_before: np.ndarray  # raw event counts per group
    n_after: np.ndarray

    @property
    def before_daily(self) -> np.ndarray:
        return self.before / self.window_days

    @property
    def after_daily(self) -> np.ndarray:
        return self.after / self.window_days

    @property
    def before_share(self) -> np.ndarray:
        return _shares(self.before)

    @property
    def after_share(self) -> np.ndarray:
        return _shares(self.after)

    def reindex(self, groups: Sequence[str]) -> "WindowCounts":
        """Align to ``groups``; absent groups get zero counts."""
        pos = {g: i for i, g in enumerate(self.groups)}

        def pick(a):
            return np.array([a[pos[g]] if g in pos else 0.0 for g in groups], dtype=float)

        return replace(
            self,
            groups=tuple(groups),
            before=pick(self.before),
            after=pick(self.after),
            n_before=pick(self.n_before),
            n_after=pick(self.n_after),
        )


@dataclass(frozen=True)
class CohortDelta:
    group: str
    window_days: int
    count_delta: float
    share_delta: float
    count_before: float
    count_after: float
    share_before: float
    share_after: float
    seasonally_adjusted: bool = False
    count_ci: tuple[float, float] | None = None
    share_ci: tuple[float, float] | None = None
    level: float | None = None

    @property
    def count_significant(self) -> bool:
        return self.count_ci is not None and (self.count_ci[0] > 0 or self.count_ci[1] < 0)

    @property
    def share_significant(self) -> bool:
        return self.share_ci is not None and (self.share_ci[0] > 0 or self.share_ci[1] < 0)


@dataclass
class WindowAnalysis:
    factor: str
    anchor: dt.date
    window_days: int
    deltas: list[CohortDelta]
    total: CohortDelta
    prior_anchor: dt.date | None = None
    warnings: list[str] = field(default_factory=list)

    def delta(self, group: str) -> CohortDelta:
        for d in self.deltas:
            if d.group == group:
                return d
        raise KeyError(group)


def _shares(a: np.ndarray) -> np.ndarray:
    tot = a.sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(tot > 0, a / np.where(tot > 0, tot, 1.0), 0.0)
    return s


def _level_of(e: EventRecord, factor: str) -> str:
    try:
        return e.attributes[factor]
    except KeyError:
        raise FactorMissing(factor) from None


def factor_levels(events: Iterable[EventRecord], factor: str) -> tuple[str, ...]:
    levels = {_level_of(e, factor) for e in events}
    if not levels:
        raise EmptyData("no events")
    return tuple(sorted(levels))


def date_range(events: Sequence[EventRecord]) -> tuple[dt.date, dt.date]:
    if not events:
        raise EmptyData("no events")
    dates = [e.date for e in events]
    return min(dates), max(dates)


def _window_bounds(anchor: dt.date, window_days: int):
    if window_days < 1:
        raise InputError(f"window must be at least one day, got {window_days}")
    w = dt.timedelta(days=window_days)
    return anchor - w, anchor + w


def _split(events, anchor, window_days, factor, data_range):
    lo, hi = _window_bounds(anchor, window_days)
    first, last = data_range or date_range(events)
    if lo < first or hi - dt.timedelta(days=1) > last:
        raise WindowOutOfRange(
            f"window [{lo}, {hi}) around {anchor} exceeds the data range {first}..{last}"
        )
    before, after = [], []
    for e in events:
        if lo <= e.date < anchor:
            before.append((_level_of(e, factor), e.weight))
        elif anchor <= e.date < hi:
            after.append((_level_of(e, factor), e.weight))
    return before, after


def _tally(items, groups):
    pos = {g: i for i, g in enumerate(groups)}
    tot = np.zeros(len(groups))
    cnt = np.zeros(len(groups))
    for g, w in items:
        tot[pos[g]] += w
        cnt[pos[g]] += 1
    return tot, cnt


def window_counts(
    events: Sequence[EventRecord],
    anchor: dt.date,
    window_days: int,
    factor: str,
    groups: Sequence[str] | None = None,
    data_range: tuple[dt.date, dt.date] | None = None,
) -> WindowCounts:
    """Per-group weighted totals in the before and after windows.

    ``data_range`` defaults to the span of event dates; both windows must fit
    inside it.
    """
    if not any(factor in e.attributes for e in events):
        raise FactorMissing(factor)
    groups = tuple(groups) if groups is not None else factor_levels(events, factor)
    before, after = _split(events, anchor, window_days, factor, data_range)
    b, nb = _tally(before, groups)
    a, na = _tally(after, groups)
    return WindowCounts(factor, anchor, window_days, groups, b, a, nb, na)


def cohort_deltas(current: WindowCounts, prior: WindowCounts | None = None) -> list[CohortDelta]:
    """Point deltas per group, seasonally adjusted when ``prior`` is given."""
    groups = current.groups
    if prior is not None:
        groups = tuple(sorted(set(current.groups) | set(prior.groups)))
        prior = prior.reindex(groups)
    current = current.reindex(groups)
    count_delta = current.after_daily - current.before_daily
    share_delta = current.after_share - current.before_share
    if prior is not None:
        count_delta = count_delta - (prior.after_daily - prior.before_daily)
        share_delta = share_delta - (prior.after_share - prior.before_share)
    out = []
    for i, g in enumerate(groups):
        out.append(
            CohortDelta(
                group=g,
                window_days=current.window_days,
                count_delta=float(count_delta[i]),
                share_delta=float(share_delta[i]),
                count_before=float(current.before_daily[i]),
                count_after=float(current.after_daily[i]),
                share_before=float(current.before_share[i]),
                share_after=float(current.after_share[i]),
                seasonally_adjusted=prior is not None,
            )
        )
    return out


def _poisson_totals(items, groups, n_boot: int, rng: np.random.Generator) -> np.ndarray:
    """Bootstrap replicates of weighted group totals, shape (n_boot, groups).

    Events sharing a group and a weight are pooled: a sum of ``k`` Poisson(1)
    multiplicities is Poisson(k).
    """
    buckets: dict[tuple[str, float], int] = defaultdict(int)
    for g, w in items:
        buckets[(g, w)] += 1
    pos = {g: i for i, g in enumerate(groups)}
    out = np.zeros((n_boot, len(groups)))
    for (g, w), k in sorted(buckets.items()):
        out[:, pos[g]] += w * rng.poisson(k, size=n_boot)
    return out


def _percentile(samples: np.ndarray, level: float, point: float) -> tuple[float, float]:
    alpha = 1.0 - level
    lo, hi = np.quantile(samples, [alpha / 2, 1 - alpha / 2])
    # a skewed bootstrap distribution can leave the point estimate outside
    return float(min(lo, point)), float(max(hi, point))


def bootstrap_ci(
    events: Sequence[EventRecord],
    anchor: dt.date,
    window_days: int,
    factor: str,
    level: float = 0.95,
    n_boot: int = 999,
    seed: int | RngSeed = 0,
    prior_anchor: dt.date | None = None,
    groups: Sequence[str] | None = None,
    data_range: tuple[dt.date, dt.date] | None = None,
) -> WindowAnalysis:
    """Point deltas plus percentile-bootstrap CIs for one window length.

    Groups with fewer than five events in the current windows get ``None``
    CIs and a warning. The generator is seeded from ``(seed, window_days)``
    so each window's intervals do not depend on which other windows run.
    """
    if not 0 < level < 1:
        raise InputError(f"confidence level must lie in (0, 1), got {level}")
    if n_boot < MIN_BOOT:
        raise InputError(f"need at least {MIN_BOOT} bootstrap replicates, got {n_boot}")
    seed = as_seed(seed)
    if not any(factor in e.attributes for e in events):
        raise FactorMissing(factor)
    groups = tuple(groups) if groups is not None else factor_levels(events, factor)
    cur = window_counts(events, anchor, window_days, factor, groups, data_range)
    prior = None
    if prior_anchor is not None:
        prior = window_counts(events, prior_anchor, window_days, factor, groups, data_range)
    deltas = cohort_deltas(cur, prior)

    rng = np.random.default_rng(np.random.SeedSequence([seed.seed, window_days]))
    b_items, a_items = _split(events, anchor, window_days, factor, data_range)
    sides = [_poisson_totals(b_items, groups, n_boot, rng), _poisson_totals(a_items, groups, n_boot, rng)]
    if prior_anchor is not None:
        pb, pa = _split(events, prior_anchor, window_days, factor, data_range)
        sides += [_poisson_totals(pb, groups, n_boot, rng), _poisson_totals(pa, groups, n_boot, rng)]

    def delta_of(tb, ta, fn):
        return fn(ta) - fn(tb)

    daily = lambda t: t / window_days  # noqa: E731
    cnt = delta_of(sides[0], sides[1], daily)
    shr = delta_of(sides[0], sides[1], _shares)
    tot = delta_of(sides[0].sum(axis=1), sides[1].sum(axis=1), daily)
    if prior_anchor is not None:
        cnt = cnt - delta_of(sides[2], sides[3], daily)
        shr = shr - delta_of(sides[2], sides[3], _shares)
        tot = tot - delta_of(sides[2].sum(axis=1), sides[3].sum(axis=1), daily)

    warnings = []
    out = []
    n_events = cur.n_before + cur.n_after
    for i, d in enumerate(deltas):
        if n_events[i] < MIN_GROUP_EVENTS:
            warnings.append(
                f"group {d.group!r} has {int(n_events[i])} events in the {window_days}-day windows; CI undefined"
            )
            out.append(replace(d, level=level))
            continue
        out.append(
            replace(
                d,
                count_ci=_percentile(cnt[:, i], level, d.count_delta),
                share_ci=_percentile(shr[:, i], level, d.share_delta),
                level=level,
            )
        )

    total_point = float(sum(d.count_delta for d in deltas))
    total = CohortDelta(
        group=TOTAL,
        window_days=window_days,
        count_delta=total_point,
        share_delta=0.0,
        count_before=float(cur.before_daily.sum()),
        count_after=float(cur.after_daily.sum()),
        share_before=1.0 if cur.before.sum() > 0 else 0.0,
        share_after=1.0 if cur.after.sum() > 0 else 0.0,
        seasonally_adjusted=prior is not None,
        count_ci=_percentile(tot, level, total_point) if n_events.sum() >= MIN_GROUP_EVENTS else None,
        share_ci=None,
        level=level,
    )
    return WindowAnalysis(factor, anchor, window_days, out, total, prior_anchor, warnings)


def cohort_analysis(
    events: Sequence[EventRecord],
    anchor: dt.date,
    factor: str,
    windows: Sequence[int] = DEFAULT_WINDOWS,
    level: float = 0.95,
    n_boot: int = 999,
    seed: int | RngSeed = 0,
    prior_anchor: dt.date | None = None,
) -> list[WindowAnalysis]:
    groups = factor_levels(events, factor)
    rng_ = date_range(events)
    return [
        bootstrap_ci(events, anchor, w, factor, level, n_boot, seed, prior_anchor, groups, rng_) for w in windows
    ]


def previous_year(anchor: dt.date) -> dt.date:
    try:
        return anchor.replace(year=anchor.year - 1)
    except ValueError:  # 29 February
        return anchor.replace(year=anchor.year - 1, day=28)


def daily_totals(events: Sequence[EventRecord]) -> tuple[dt.date, np.ndarray]:
    """Weighted event totals for every calendar day between the first and last event."""
    first, last = date_range(events)
    out = np.zeros((last - first).days + 1)
    for e in events:
        out[(e.date - first).days] += e.weight
    return first, out


ANCHOR_MIN_SEG_LEN = 7


def anchor_penalty(T: int, cost: str) -> float:
    """Three times the BIC penalty; plain BIC puts spurious early breaks into daily count series."""
    return 3.0 * CostModel(cost).n_params * math.log(T)


def detect_anchor(
    events: Sequence[EventRecord],
    cost: str | None = None,
    penalty: PenaltySpec | float | None = None,
    min_seg_len: int = ANCHOR_MIN_SEG_LEN,
) -> dt.date:
    """First change-point of the daily total series, as a calendar date.

    Uses the Poisson cost when all totals are integers, L2 otherwise.
    """
    start, totals = daily_totals(events)
    if cost is None:
        cost = "poisson" if np.all(totals == np.round(totals)) else "l2"
    series = make_series(totals, start_date=start, label="daily total")
    if penalty is None:
        penalty = anchor_penalty(series.T, cost)
        if cost == "l2":
            penalty *= noise_variance(totals)
    solver = "exact" if cost == "poisson" else "pelt"
    res = detect(series, CostModel(cost), penalty, min_seg_len, solver=solver)
    if not res.breaks:
        raise AnalysisError("no change-point found in the daily totals; give the anchor explicitly")
    return series.date_of(res.breaks[0])


@dataclass
class SeveritySplit:
    anchor: dt.date
    window_days: int
    by_mode: dict[str, WindowAnalysis]
    by_severity: dict[str, WindowAnalysis]
    overall: WindowAnalysis
    no_injury_share: tuple[float, float]


def severity_split(
    events: Sequence[EventRecord],
    anchor: dt.date,
    window_days: int,
    severity: str = "severity",
    mode: str = "mode",
    no_injury: str = "no_injury",
    level: float = 0.95,
    n_boot: int = 999,
    seed: int | RngSeed = 0,
    prior_anchor: dt.date | None = None,
) -> SeveritySplit:
    """Severity deltas within each transport-mode stratum and vice versa."""
    for e in events:
        _level_of(e, severity)
        _level_of(e, mode)
    rng_ = date_range(events)
    sev_levels = factor_levels(events, severity)
    mode_levels = factor_levels(events, mode)

    def run(subset, factor, groups):
        return bootstrap_ci(subset, anchor, window_days, factor, level, n_boot, seed, prior_anchor, groups, rng_)

    by_mode = {
        m: run([e for e in events if e.attributes[mode] == m], severity, sev_levels) for m in mode_levels
    }
    by_sev = {
        s: run([e for e in events if e.attributes[severity] == s], mode, mode_levels) for s in sev_levels
    }
    overall = run(events, severity, sev_levels)
    wc = window_counts(events, anchor, window_days, severity, sev_levels, rng_)
    if no_injury in sev_levels:
        i = sev_levels.index(no_injury)
        share = (float(wc.before_share[i]), float(wc.after_share[i]))
    else:
        share = (0.0, 0.0)
    return SeveritySplit(anchor, window_days, by_mode, by_sev, overall, share)


def did_records(
    events: Sequence[EventRecord],
    anchor: dt.date,
    prior_anchor: dt.date,
    window_days: int,
    factor: str,
) -> list[DidRecord]:
    """One record per (period, day, group): daily weighted count as ``y``.

    ``time`` is the anchor's year, ``lockdown`` marks days on or after the anchor.
    """
    groups = factor_levels(events, factor)
    out = []
    for a in (prior_anchor, anchor):
        lo, hi = _window_bounds(a, window_days)
        counts = defaultdict(float)
        for e in events:
            if lo <= e.date < hi:
                counts[(e.date, _level_of(e, factor))] += e.weight
        for d in range(2 * window_days):
            day = lo + dt.timedelta(days=d)
            for g in groups:
                out.append(DidRecord(counts.get((day, g), 0.0), a.year, int(day >= a), g))
    return out
