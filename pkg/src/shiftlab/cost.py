"""Segment cost functions.

Three families, each defined up to an additive constant per segment:

* ``l2``      sum of squared deviations from the segment mean
* ``normal``  ``len * log(max(var, var_floor))``, twice the negative profile
              log-likelihood of a Gaussian with its own mean and variance
* ``poisson`` ``2 * sum(lam - m_t * log(lam))`` with ``lam = max(mean, rate_floor)``
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import TimeSeries
from .errors import InputError, InvalidRange, NegativeCount, SegmentTooShort

KINDS = ("l2", "normal", "poisson")


@dataclass(frozen=True)
class CostModel:
    kind: str = "l2"
    var_floor: float = 1e-8
    rate_floor: float = 1e-8

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown cost model {self.kind!r}; expected one of {KINDS}")
        if not (self.var_floor > 0 and self.rate_floor > 0):
            raise InputError("cost floors must be positive")

    @property
    def min_length(self) -> int:
        return 2 if self.kind == "normal" else 1

    @property
    def n_params(self) -> int:
        """Free parameters per segment."""
        return 2 if self.kind == "normal" else 1

    @property
    def lower_bound(self) -> float:
        """Per-observation lower bound of the cost."""
        if self.kind == "normal":
            return float(np.log(self.var_floor))
        return 0.0


L2 = CostModel("l2")
NORMAL = CostModel("normal")
POISSON = CostModel("poisson")


def cost_model(kind: str) -> CostModel:
    return CostModel(kind)


def check_counts(values: np.ndarray) -> None:
    neg = np.flatnonzero(values < 0)
    if neg.size:
        i = int(neg[0])
        raise NegativeCount(i + 1, float(values[i]))
    frac = np.flatnonzero(values != np.round(values))
    if frac.size:
        i = int(frac[0])
        raise InputError(f"Poisson cost needs integer counts; got {values[i]!r} at index {i + 1}")


def segment_cost(series: TimeSeries, start: int, end_exclusive: int, model: CostModel = L2) -> float:
    """Direct cost of the 1-based half-open segment ``[start, end_exclusive)``."""
    T = series.T
    if not 1 <= start < end_exclusive <= T + 1:
        raise InvalidRange(f"invalid segment [{start}, {end_exclusive}) for T={T}")
    seg = series.values[start - 1 : end_exclusive - 1]
    n = seg.size
    if n < model.min_length:
        raise SegmentTooShort(f"{model.kind} cost needs at least {model.min_length} points, got {n}")
    if model.kind == "l2":
        return float(np.sum((seg - seg.mean()) ** 2))
    if model.kind == "normal":
        var = float(np.mean((seg - seg.mean()) ** 2))
        return n * float(np.log(max(var, model.var_floor)))
    check_counts(seg)
    lam = max(float(seg.mean()), model.rate_floor)
    return 2.0 * float(np.sum(lam - seg * np.log(lam)))


class CostCache:
    """Prefix-sum tables giving O(1) segment-cost queries."""

    def __init__(self, series: TimeSeries, model: CostModel = L2):
        self.model = model
        self.T = series.T
        x = series.values
        if model.kind == "poisson":
            check_counts(x)
            self._s1 = np.concatenate(([0.0], np.cumsum(x)))
            self._s2 = None
        else:
            # Centering first keeps S2 - S1^2/n well conditioned; both costs are shift invariant.
            xc = x - x.mean()
            self._s1 = np.concatenate(([0.0], np.cumsum(xc)))
            self._s2 = np.concatenate(([0.0], np.cumsum(xc * xc)))

    def cost(self, start: int, end_exclusive: int) -> float:
        """Cost of the 1-based segment ``[start, end_exclusive)``."""
        if not 1 <= start < end_exclusive <= self.T + 1:
            raise InvalidRange(f"invalid segment [{start}, {end_exclusive}) for T={self.T}")
        if end_exclusive - start < self.model.min_length:
            raise SegmentTooShort(f"{self.model.kind} cost needs at least {self.model.min_length} points")
        return float(self.costs0(start - 1, end_exclusive - 1))

    def costs0(self, s0, e0):
        """Vectorised costs for 0-based half-open ``[s0, e0)``; no validation."""
        s0 = np.asarray(s0)
        e0 = np.asarray(e0)
        n = (e0 - s0).astype(float)
        s1 = self._s1[e0] - self._s1[s0]
        m = self.model
        if m.kind == "poisson":
            lam = np.maximum(s1 / n, m.rate_floor)
            return 2.0 * (n * lam - s1 * np.log(lam))
        ss = np.maximum(self._s2[e0] - self._s2[s0] - s1 * s1 / n, 0.0)
        if m.kind == "l2":
            return ss
        return n * np.log(np.maximum(ss / n, m.var_floor))


def prefix_tables(series: TimeSeries, model: CostModel = L2) -> CostCache:
    return CostCache(series, model)
