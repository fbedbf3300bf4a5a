"""Penalised change-point detection.

Minimises ``V(tau) + beta * K`` where ``V`` sums segment costs over the
segmentation. Two solvers share one recursion and one tie-break rule:

* ``detect_exact``: O(T^2) dynamic programme over all admissible segmentations.
* ``detect_pelt``: the same programme with PELT candidate pruning.

The recursion runs backwards over suffixes, ``G(s) = min_e c(s, e) + beta + G(e)``,
so that the tie-break (fewer breaks, then the lexicographically earliest break
list) is resolved by picking, at each start, the smallest next break among the
minimisers.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .core import Segmentation, TimeSeries
from .cost import L2, CostCache, CostModel, segment_cost
from .errors import InputError, InvalidSegmentation, SeriesTooShort

RULES = ("bic", "aic", "manual")

# Phi^{-1}(3/4)^2: median of |N(0, 1)| squared.
_MAD_Q2 = float(norm.ppf(0.75)) ** 2

TIE_RTOL = 1e-10


class PruningWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PenaltySpec:
    rule: str = "bic"
    beta: float | None = None

    def __post_init__(self):
        if self.rule not in RULES:
            raise InputError(f"unknown penalty rule {self.rule!r}")
        if self.rule == "manual":
            if self.beta is None or not (self.beta > 0 and math.isfinite(self.beta)):
                raise InputError(f"manual penalty needs a positive finite beta, got {self.beta!r}")

    @classmethod
    def manual(cls, beta: float) -> "PenaltySpec":
        return cls("manual", float(beta))

    @classmethod
    def parse(cls, text: str) -> "PenaltySpec":
        """``"bic"``, ``"aic"`` or a positive float."""
        low = text.strip().lower()
        if low in ("bic", "aic"):
            return cls(low)
        try:
            return cls.manual(float(low))
        except ValueError:
            raise InputError(f"penalty must be bic, aic or a positive number, got {text!r}") from None

    def resolve(self, series: TimeSeries, model: CostModel) -> float:
        if self.rule == "manual":
            return float(self.beta)
        return default_penalty(series, model, self.rule)


def noise_variance(values: np.ndarray) -> float:
    """Robust noise variance from the median absolute successive difference.

    Falls back to half the variance of the differences, then to 1, when the
    median difference is zero.
    """
    d = np.diff(np.asarray(values, dtype=float))
    med = float(np.median(np.abs(d)))
    if med > 0:
        return med * med / (2.0 * _MAD_Q2)
    v = float(np.var(d)) / 2.0 if d.size else 0.0
    return v if v > 0 else 1.0


def default_penalty(series: TimeSeries, model: CostModel = L2, rule: str = "bic") -> float:
    T = series.T
    if T < 2:
        raise SeriesTooShort(f"penalty rules need T >= 2, got {T}")
    p = model.n_params
    scale = noise_variance(series.values) if model.kind == "l2" else 1.0
    if rule == "bic":
        return p * math.log(T) * scale
    if rule == "aic":
        return 2.0 * p * scale
    raise InputError(f"unknown penalty rule {rule!r}")


@dataclass(frozen=True)
class DetectionResult:
    segmentation: Segmentation
    objective: float
    per_segment_costs: tuple[float, ...]
    solver: str
    beta: float
    cost: str
    min_seg_len: int
    mean_candidates: float = field(default=float("nan"), compare=False)

    @property
    def breaks(self) -> tuple[int, ...]:
        return self.segmentation.breaks

    @property
    def K(self) -> int:
        return self.segmentation.K


def evaluate_segmentation(series: TimeSeries, seg: Segmentation, model: CostModel, beta: float) -> float:
    if seg.series_len != series.T:
        raise InvalidSegmentation(f"segmentation is for T={seg.series_len}, series has T={series.T}")
    total = sum(segment_cost(series, s, e, model) for s, e in seg.segments())
    return total + beta * seg.K


def _valid_starts(n: int, m: int) -> np.ndarray:
    """Mask over 0..n of positions where a segment may begin (index n is the terminal)."""
    ok = np.zeros(n + 1, dtype=bool)
    ok[0] = True
    # interior starts: 1-based break b = s + 1 must satisfy 1 < b < T
    ok[1 : max(n - 1, 1)] = True
    ok[np.arange(n + 1) > n - m] = False
    ok[n] = True
    return ok


def _solve(series: TimeSeries, model: CostModel, penalty, min_seg_len: int, prune: bool) -> DetectionResult:
    if min_seg_len < 1:
        raise InputError(f"min_seg_len must be positive, got {min_seg_len}")
    n = series.T
    m = max(int(min_seg_len), model.min_length)
    if n < m:
        raise SeriesTooShort(f"series of length {n} is shorter than the minimum segment length {m}")
    beta = penalty.resolve(series, model) if isinstance(penalty, PenaltySpec) else float(penalty)
    if not (beta > 0 and math.isfinite(beta)):
        raise InputError(f"beta must be positive and finite, got {beta!r}")

    cache = CostCache(series, model)
    tol = TIE_RTOL * (1.0 + abs(float(cache.costs0(0, n))) + beta)
    ok = _valid_starts(n, m)

    G = np.full(n + 1, np.inf)
    Kc = np.zeros(n + 1, dtype=np.int64)
    nxt = np.full(n + 1, -1, dtype=np.int64)
    G[n] = -beta
    Kc[n] = -1

    cand = np.array([n], dtype=np.int64)
    pending: list[tuple[int, np.ndarray]] = []
    n_cand_total = 0
    n_steps = 0
    all_ends = np.flatnonzero(ok)

    for s in range(n - 1, -1, -1):
        if prune and pending:
            # a prune decided at s_k is only safe for starts at least m before s_k
            keep = []
            for sk, drop in pending:
                if sk - s >= m:
                    cand = cand[~np.isin(cand, drop)]
                else:
                    keep.append((sk, drop))
            pending = keep
        if not ok[s]:
            continue
        pool = cand if prune else all_ends
        ends = pool[pool >= s + m]
        if ends.size == 0:
            continue
        n_cand_total += ends.size
        n_steps += 1
        c = cache.costs0(s, ends)
        vals = c + beta + G[ends]
        best = vals.min()
        tied = vals <= best + tol
        kmin = Kc[ends[tied]].min()
        pick = np.flatnonzero(tied & (Kc[ends] == kmin))[0]
        G[s] = vals[pick]
        Kc[s] = Kc[ends[pick]] + 1
        nxt[s] = ends[pick]
        if prune:
            drop = ends[c + G[ends] > G[s] + tol]
            if drop.size:
                pending.append((s, drop))
            if s > 0:
                cand = np.append(cand, s)

    if not np.isfinite(G[0]):
        raise SeriesTooShort(f"no admissible segmentation for T={n}, min_seg_len={m}")

    bounds = [0]
    while bounds[-1] != n:
        bounds.append(int(nxt[bounds[-1]]))
    breaks = tuple(b + 1 for b in bounds[1:-1])
    seg = Segmentation(breaks, n)
    costs = tuple(float(cache.costs0(a, b)) for a, b in zip(bounds[:-1], bounds[1:]))
    return DetectionResult(
        segmentation=seg,
        objective=float(sum(costs) + beta * seg.K),
        per_segment_costs=costs,
        solver="pelt" if prune else "exact",
        beta=beta,
        cost=model.kind,
        min_seg_len=m,
        mean_candidates=n_cand_total / max(n_steps, 1),
    )


def detect_exact(
    series: TimeSeries,
    model: CostModel = L2,
    penalty: PenaltySpec | float = PenaltySpec(),
    min_seg_len: int = 2,
) -> DetectionResult:
    return _solve(series, model, penalty, min_seg_len, prune=False)


def detect_pelt(
    series: TimeSeries,
    model: CostModel = L2,
    penalty: PenaltySpec | float = PenaltySpec(),
    min_seg_len: int = 2,
) -> DetectionResult:
    """Pruned solver; same objective and tie-break as :func:`detect_exact`.

    Pruning assumes ``c(a, b) + c(b, c) <= c(a, c)``. That holds for all three
    families while the variance / rate floors are inactive. Poisson segments
    of all zeros sit on the rate floor, so a warning is emitted and
    ``detect_exact`` is the safe fallback.
    """
    if model.kind == "poisson":
        warnings.warn(
            "PELT pruning with the Poisson cost is exact only while no segment mean hits the rate floor; "
            "use detect_exact to be safe",
            PruningWarning,
            stacklevel=2,
        )
    return _solve(series, model, penalty, min_seg_len, prune=True)


def detect(
    series: TimeSeries,
    model: CostModel = L2,
    penalty: PenaltySpec | float = PenaltySpec(),
    min_seg_len: int = 2,
    solver: str = "pelt",
) -> DetectionResult:
    if solver == "exact":
        return detect_exact(series, model, penalty, min_seg_len)
    if solver == "pelt":
        return detect_pelt(series, model, penalty, min_seg_len)
    raise InputError(f"unknown solver {solver!r}")
