import datetime as dt

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shiftlab.cohort import (
    bootstrap_ci,
    cohort_analysis,
    cohort_deltas,
    detect_anchor,
    did_records,
    previous_year,
    severity_split,
    window_counts,
)
from shiftlab.core import EventRecord
from shiftlab.did import build_design, fit_ols
from shiftlab.errors import FactorMissing, InputError, WindowOutOfRange
from shiftlab.synth import poisson_events, step_rate

ANCHOR = dt.date(2020, 3, 19)
D = dt.timedelta


def ev(day_offset, group, factor="g", **extra):
    return EventRecord(ANCHOR + D(days=day_offset), None, {factor: group, **extra})


def bracket(events, days=60):
    """Zero-weight-free sentinels so windows of ``days`` fit the data range."""
    return events + [ev(-days, "_edge"), ev(days - 1, "_edge")]


def test_daily_mean_arithmetic():
    events = [ev(-30 + i, "A") for i in range(30)] + [ev(0, "B")]
    wc = window_counts(events, ANCHOR, 30, "g", data_range=(ANCHOR - D(30), ANCHOR + D(30)))
    i = wc.groups.index("A")
    assert wc.before_daily[i] == 1.0
    assert wc.after_daily[i] == 0.0
    assert wc.after_share[i] == 0.0


def test_group_absent_after_gets_zero_share():
    events = [ev(-3, "A"), ev(-2, "B"), ev(1, "B"), ev(29, "B")]
    deltas = {d.group: d for d in cohort_deltas(window_counts(events, ANCHOR, 30, "g", data_range=(ANCHOR - D(30), ANCHOR + D(30))))}
    assert deltas["A"].count_after == 0.0 and deltas["A"].share_after == 0.0
    assert deltas["A"].share_before == 0.5


def test_planted_rates_recovered():
    rng = np.random.default_rng(0)
    events = poisson_events(ANCHOR - D(60), 120, {"A": step_rate(5, 2, ANCHOR), "B": 10.0}, "g", rng)
    wc = window_counts(events, ANCHOR, 60, "g")
    planted = {"A": (5, 2), "B": (10, 10)}
    for i, g in enumerate(wc.groups):
        for got, rate in zip((wc.before_daily[i], wc.after_daily[i]), planted[g]):
            assert abs(got - rate) < 4 * np.sqrt(rate / 60)


def mirrored(offsets_groups, shift_days=0):
    out = []
    for off, g in offsets_groups:
        out.append(EventRecord(ANCHOR + D(days=-1 - off + shift_days), None, {"g": g}))
        out.append(EventRecord(ANCHOR + D(days=off + shift_days), None, {"g": g}))
    return out


def test_identical_windows_zero_deltas():
    rng = np.random.default_rng(1)
    base = [(int(rng.integers(0, 30)), "ABC"[int(rng.integers(3))]) for _ in range(200)]
    events = bracket(mirrored(base), 30)
    for d in cohort_deltas(window_counts(events, ANCHOR, 30, "g")):
        assert d.count_delta == 0.0 and d.share_delta == 0.0


def test_seasonal_adjustment_cancels_identical_trend():
    rng = np.random.default_rng(2)
    cur = [(ANCHOR + D(days=int(o)), "ABC"[int(rng.integers(3))]) for o in rng.integers(-30, 30, 300)]
    prior_anchor = previous_year(ANCHOR)
    shift = ANCHOR - prior_anchor
    events = [EventRecord(day, None, {"g": g}) for day, g in cur]
    events += [EventRecord(day - shift, None, {"g": g}) for day, g in cur]
    current = window_counts(events, ANCHOR, 30, "g")
    prior = window_counts(events, prior_anchor, 30, "g")
    raw = cohort_deltas(current)
    adj = cohort_deltas(current, prior)
    assert any(abs(d.count_delta) > 0 for d in raw)
    for d in adj:
        assert d.seasonally_adjusted
        assert d.count_delta == pytest.approx(0.0, abs=1e-12)
        assert d.share_delta == pytest.approx(0.0, abs=1e-12)


def test_planted_share_drop_exact():
    events = [ev(-1 - i % 30, "focus" if i < 200 else "rest") for i in range(1000)]
    events += [ev(i % 30, "focus" if i < 168 else "rest") for i in range(1000)]
    d = {x.group: x for x in cohort_deltas(window_counts(events, ANCHOR, 30, "g"))}
    assert d["focus"].share_delta == pytest.approx(-0.032, abs=1e-12)
    assert d["focus"].share_before == pytest.approx(0.2) and d["focus"].share_after == pytest.approx(0.168)


event_lists = st.lists(
    st.tuples(st.integers(-60, 59), st.sampled_from(["a", "b", "c", "d"]), st.sampled_from([1.0, 0.5, 2.0])),
    min_size=1,
    max_size=200,
)


@given(event_lists, st.sampled_from([15, 30, 60]))
def test_share_and_count_conservation(items, w):
    # shares are only defined when each window holds at least one event
    items = items + [(-1, "a", 1.0), (0, "b", 1.0)]
    events = bracket([EventRecord(ANCHOR + D(days=o), None, {"g": g}, wt) for o, g, wt in items])
    res = bootstrap_ci(events, ANCHOR, w, "g", n_boot=200, seed=1)
    assert abs(sum(d.share_delta for d in res.deltas)) <= 1e-9
    assert abs(sum(d.count_delta for d in res.deltas) - res.total.count_delta) <= 1e-9
    wc = window_counts(events, ANCHOR, w, "g")
    for shares in (wc.before_share, wc.after_share):
        assert shares.sum() == pytest.approx(1.0, abs=1e-9)
    for d in res.deltas + [res.total]:
        for ci, pt in ((d.count_ci, d.count_delta), (d.share_ci, d.share_delta)):
            if ci is not None:
                assert ci[0] <= pt <= ci[1]


def test_window_nesting():
    rng = np.random.default_rng(3)
    events = poisson_events(ANCHOR - D(60), 120, {"A": 3.0, "B": 2.0}, "g", rng)
    sets = {}
    for w in (15, 30, 60):
        sets[w] = {id(e) for e in events if ANCHOR - D(days=w) <= e.date < ANCHOR}
    assert sets[15] <= sets[30] <= sets[60]
    counts = [window_counts(events, ANCHOR, w, "g").before.sum() for w in (15, 30, 60)]
    assert counts == sorted(counts)


def test_errors():
    events = [ev(-5, "A"), ev(5, "B")]
    with pytest.raises(WindowOutOfRange):
        window_counts(events, ANCHOR, 30, "g")
    with pytest.raises(FactorMissing):
        window_counts(events, ANCHOR, 5, "race")
    with pytest.raises(InputError):
        bootstrap_ci(bracket(events), ANCHOR, 30, "g", n_boot=50)
    with pytest.raises(InputError):
        bootstrap_ci(bracket(events), ANCHOR, 30, "g", level=1.5)


def test_bootstrap_determinism_and_insufficient_groups():
    rng = np.random.default_rng(4)
    events = poisson_events(ANCHOR - D(30), 60, {"A": 4.0, "B": 6.0}, "g", rng)
    events.append(ev(-2, "rare"))
    a = bootstrap_ci(events, ANCHOR, 30, "g", n_boot=300, seed=9)
    b = bootstrap_ci(events, ANCHOR, 30, "g", n_boot=300, seed=9)
    assert a.deltas == b.deltas and a.total == b.total
    rare = a.delta("rare")
    assert rare.count_ci is None and rare.share_ci is None
    assert any("rare" in w for w in a.warnings)
    assert a.delta("A").count_ci is not None


def test_bootstrap_large_shift_excludes_zero():
    rng = np.random.default_rng(5)
    events = poisson_events(ANCHOR - D(60), 120, {"A": step_rate(22, 11, ANCHOR)}, "g", rng)
    assert len(events) > 1500
    res = bootstrap_ci(events, ANCHOR, 60, "g", n_boot=999, seed=0)
    lo, hi = res.delta("A").count_ci
    assert hi < 0


def test_window_ci_independent_of_other_windows():
    rng = np.random.default_rng(6)
    events = poisson_events(ANCHOR - D(60), 120, {"A": 4.0, "B": 6.0}, "g", rng)
    one = cohort_analysis(events, ANCHOR, "g", windows=(30,), n_boot=200, seed=3)
    three = cohort_analysis(events, ANCHOR, "g", windows=(15, 30, 60), n_boot=200, seed=3)
    assert one[0].deltas == three[1].deltas


def test_severity_split_all_no_injury():
    rng = np.random.default_rng(7)
    extra = lambda g, day, r: {"severity": "no_injury", "mode": ["none", "pedestrian", "motorist"][int(r.integers(3))]}  # noqa: E731
    events = poisson_events(ANCHOR - D(30), 60, {"A": 10.0}, "g", rng, extra=extra)
    s = severity_split(events, ANCHOR, 30, n_boot=200)
    assert s.no_injury_share == (1.0, 1.0)
    assert set(s.by_mode) == {"none", "pedestrian", "motorist"}
    assert set(s.by_severity) == {"no_injury"}


def test_severity_split_missing_mode():
    events = [ev(-1, "A", severity="fatal"), ev(1, "A", severity="fatal")]
    with pytest.raises(FactorMissing):
        severity_split(events, ANCHOR, 1, n_boot=200)


def test_detect_anchor_finds_drop():
    hits = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        events = poisson_events(ANCHOR - D(90), 180, {"A": step_rate(40, 20, ANCHOR)}, "g", rng)
        hits += abs((detect_anchor(events) - ANCHOR).days) <= 2
    assert hits >= 18


def test_empty_window_shares_are_zero_not_nan():
    events = [ev(-3, "A"), ev(-60, "B"), ev(59, "B")]
    d = cohort_deltas(window_counts(events, ANCHOR, 30, "g"))
    assert all(x.share_after == 0.0 and np.isfinite(x.share_delta) for x in d)


def test_seasonal_adjustment_agrees_with_did():
    rng = np.random.default_rng(9)
    prior = previous_year(ANCHOR)
    rates = {"A": lambda d: 8.0 if d < prior else (6.0 if d < ANCHOR - D(60) else (8.0 if d < ANCHOR else 3.0)), "B": 5.0}
    events = poisson_events(prior - D(30), (ANCHOR - prior).days + 60, rates, "g", rng)
    adj = {d.group: d for d in cohort_deltas(window_counts(events, ANCHOR, 30, "g"), window_counts(events, prior, 30, "g"))}
    fit = fit_ols(build_design(did_records(events, ANCHOR, prior, 30, "g")))
    assert fit.coef("time[2020]:lockdown") == pytest.approx(adj["A"].count_delta, abs=1e-9)
    assert fit.coef("time[2020]:lockdown:x[B]") == pytest.approx(adj["B"].count_delta - adj["A"].count_delta, abs=1e-9)
