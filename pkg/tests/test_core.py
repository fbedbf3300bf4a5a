import datetime as dt

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shiftlab.core import EventRecord, RngSeed, Segmentation, make_series
from shiftlab.errors import EmptySeries, InputError, InvalidSegmentation, NonFiniteValue


def test_make_series_length():
    s = make_series([1.0, 2.0, 3.0])
    assert s.T == 3
    assert s.at(1) == 1.0 and s.at(3) == 3.0


def test_make_series_empty():
    with pytest.raises(EmptySeries):
        make_series([])


def test_make_series_nonfinite_index_is_one_based():
    with pytest.raises(NonFiniteValue) as exc:
        make_series([1.0, float("nan")])
    assert exc.value.index == 2
    with pytest.raises(NonFiniteValue):
        make_series([float("inf")])


def test_series_is_immutable():
    s = make_series([1.0, 2.0])
    with pytest.raises(ValueError):
        s.values[0] = 5.0


def test_series_dates():
    s = make_series([1, 2, 3], start_date=dt.date(2020, 2, 28))
    assert s.date_of(3) == dt.date(2020, 3, 1)
    assert make_series([1]).date_of(1) is None


@st.composite
def segmentations(draw):
    T = draw(st.integers(1, 60))
    interior = list(range(2, T))
    breaks = sorted(draw(st.sets(st.sampled_from(interior), max_size=len(interior))) if interior else [])
    return Segmentation(tuple(breaks), T)


@given(segmentations())
def test_segments_partition_series(seg):
    covered = []
    prev_end = 1
    for s, e in seg.segments():
        assert s == prev_end
        assert e > s
        covered.extend(range(s, e))
        prev_end = e
    assert covered == list(range(1, seg.series_len + 1))
    assert len(list(seg.segments())) == seg.K + 1


@pytest.mark.parametrize("breaks,T", [((1,), 10), ((10,), 10), ((0,), 10), ((5, 5), 10), ((6, 4), 10), ((11,), 10)])
def test_invalid_segmentations_rejected(breaks, T):
    with pytest.raises(InvalidSegmentation):
        Segmentation(breaks, T)


def test_segmentation_boundaries():
    seg = Segmentation((3, 7), 10)
    assert seg.boundaries() == (1, 3, 7, 11)
    assert seg.lengths() == [2, 4, 4]


def test_event_record_validation():
    e = EventRecord(dt.date(2020, 1, 1), (1, 2), {"age": "20-29"})
    assert e.location == (1.0, 2.0) and e.weight == 1.0
    with pytest.raises(InputError):
        EventRecord(dt.date(2020, 1, 1), None, {"age": ""})
    with pytest.raises(InputError):
        EventRecord(dt.date(2020, 1, 1), None, {}, weight=0.0)
    with pytest.raises(InputError):
        EventRecord("2020-01-01")


def test_seed_range_and_determinism():
    with pytest.raises(InputError):
        RngSeed(-1)
    with pytest.raises(InputError):
        RngSeed(2**64)
    a = [g.random() for g in RngSeed(2**64 - 1).spawn(3)]
    b = [g.random() for g in RngSeed(2**64 - 1).spawn(3)]
    assert a == b
    assert RngSeed(7).generator().integers(1 << 30) == RngSeed(7).generator().integers(1 << 30)
    assert np.unique(a).size == 3
