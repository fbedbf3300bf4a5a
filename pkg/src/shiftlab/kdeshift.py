"""Bivariate kernel density estimation and the ISE permutation test.

Densities live on a rectangular lattice of nodes. Integrals over the lattice
use trapezoid weights (edge nodes 1/2, corner nodes 1/4), so the integration
domain is the padded bounding rectangle.
"""

from __future__ import annotations

import datetime as dt
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import EventRecord, RngSeed, as_seed
from .errors import DegenerateSpread, EmptySample, EmptyWindow, GridMismatch, GridTooSmall, InputError

_SQRT_2PI = math.sqrt(2.0 * math.pi)
NULL_QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)
MIN_PERMUTATIONS = 99


@dataclass(frozen=True)
class Bandwidth2D:
    hx: float
    hy: float

    def __post_init__(self):
        if not (self.hx > 0 and self.hy > 0 and math.isfinite(self.hx) and math.isfinite(self.hy)):
            raise InputError(f"bandwidths must be positive and finite, got ({self.hx}, {self.hy})")

    @property
    def max(self) -> float:
        return max(self.hx, self.hy)


@dataclass(frozen=True)
class GridSpec:
    """How to lay out a lattice: node counts, padding in bandwidths, or fixed bounds."""

    nx: int = 128
    ny: int = 128
    padding: float = 3.0
    bounds: tuple[float, float, float, float] | None = None  # (xmin, xmax, ymin, ymax)

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise InputError(f"grid needs at least 2 nodes per axis, got {self.nx}x{self.ny}")


@dataclass(frozen=True)
class Grid:
    x0: float
    y0: float
    dx: float
    dy: float
    nx: int
    ny: int

    @classmethod
    def from_bounds(cls, xmin: float, xmax: float, ymin: float, ymax: float, nx: int, ny: int) -> "Grid":
        if not (xmax > xmin and ymax > ymin):
            raise InputError("grid bounds must have positive extent")
        return cls(float(xmin), float(ymin), (xmax - xmin) / (nx - 1), (ymax - ymin) / (ny - 1), int(nx), int(ny))

    @property
    def xs(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.nx)

    @property
    def ys(self) -> np.ndarray:
        return self.y0 + self.dy * np.arange(self.ny)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return (self.x0, self.x0 + self.dx * (self.nx - 1), self.y0, self.y0 + self.dy * (self.ny - 1))

    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights times the cell area."""
        wx = np.ones(self.nx)
        wx[[0, -1]] = 0.5
        wy = np.ones(self.ny)
        wy[[0, -1]] = 0.5
        return np.outer(wx, wy) * (self.dx * self.dy)


@dataclass(frozen=True, eq=False)
class Density2D:
    grid: Grid
    values: np.ndarray  # shape (nx, ny), values[i, j] at (xs[i], ys[j])
    n_points: int
    bandwidth: Bandwidth2D | None

    def mass(self) -> float:
        return float(np.sum(self.values * self.grid.weights()))

    def argmax(self) -> tuple[float, float]:
        i, j = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return float(self.grid.xs[i]), float(self.grid.ys[j])


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return pts.reshape(0, 2)
    pts = pts.reshape(-1, 2)
    if not np.all(np.isfinite(pts)):
        raise InputError("non-finite point coordinates")
    return pts


def bandwidth_rule(points) -> Bandwidth2D:
    """Silverman's rule for 2-D data: ``h = sigma * n**(-1/6)`` per axis.

    ``sigma = min(std, IQR / 1.349)``, falling back to ``std`` when the IQR is zero.
    """
    pts = _as_points(points)
    n = pts.shape[0]
    h = []
    for axis, name in enumerate("xy"):
        col = pts[:, axis]
        sd = float(np.std(col, ddof=1)) if n >= 2 else 0.0
        if not sd > 0:
            raise DegenerateSpread(name)
        q75, q25 = np.percentile(col, [75, 25])
        iqr = float(q75 - q25) / 1.349
        sigma = min(sd, iqr) if iqr > 0 else sd
        h.append(sigma * n ** (-1.0 / 6.0))
    return Bandwidth2D(*h)


def make_grid(points, bandwidth: Bandwidth2D, spec: GridSpec = GridSpec()) -> Grid:
    if spec.bounds is not None:
        return Grid.from_bounds(*spec.bounds, spec.nx, spec.ny)
    pts = _as_points(points)
    if pts.shape[0] == 0:
        raise EmptySample("cannot lay out a grid without points")
    pad = spec.padding * bandwidth.max
    lo = pts.min(axis=0) - pad
    hi = pts.max(axis=0) + pad
    return Grid.from_bounds(lo[0], hi[0], lo[1], hi[1], spec.nx, spec.ny)


def _kernel(nodes: np.ndarray, centres: np.ndarray, h: float) -> np.ndarray:
    z = (nodes[:, None] - centres[None, :]) / h
    return np.exp(-0.5 * z * z) / (_SQRT_2PI * h)


def _check_coverage(pts: np.ndarray, bandwidth: Bandwidth2D, grid: Grid, min_padding: float) -> None:
    pad = min_padding * bandwidth.max
    xmin, xmax, ymin, ymax = grid.bounds
    slack = 1e-9 * max(1.0, pad)
    lo = pts.min(axis=0) - pad
    hi = pts.max(axis=0) + pad
    if lo[0] < xmin - slack or hi[0] > xmax + slack or lo[1] < ymin - slack or hi[1] > ymax + slack:
        raise GridTooSmall(f"grid must cover the points padded by {min_padding} bandwidths")


def estimate_density(points, bandwidth: Bandwidth2D, grid: Grid, min_padding: float = 3.0) -> Density2D:
    """Product-normal KDE evaluated at every node of ``grid``."""
    pts = _as_points(points)
    n = pts.shape[0]
    if n == 0:
        raise EmptySample("cannot estimate a density from zero points")
    _check_coverage(pts, bandwidth, grid, min_padding)
    kx = _kernel(grid.xs, pts[:, 0], bandwidth.hx)
    ky = _kernel(grid.ys, pts[:, 1], bandwidth.hy)
    values = (kx @ ky.T) / n
    return Density2D(grid, values, n, bandwidth)


def analytic_normal_density(mean: tuple[float, float], sigma: float, grid: Grid) -> Density2D:
    """Isotropic bivariate normal pdf sampled on ``grid``."""
    gx = np.exp(-0.5 * ((grid.xs - mean[0]) / sigma) ** 2) / (_SQRT_2PI * sigma)
    gy = np.exp(-0.5 * ((grid.ys - mean[1]) / sigma) ** 2) / (_SQRT_2PI * sigma)
    return Density2D(grid, np.outer(gx, gy), 0, Bandwidth2D(sigma, sigma))


def _ise_values(a: np.ndarray, b: np.ndarray, w: np.ndarray) -> float:
    d = a - b
    return float(np.sum(d * d * w))


def ise(f1: Density2D, f2: Density2D) -> float:
    """Integrated squared error between two densities on the same lattice."""
    if f1.grid != f2.grid:
        raise GridMismatch("densities are defined on different grids")
    return _ise_values(f1.values, f2.values, f1.grid.weights())


@dataclass(frozen=True)
class ShiftTestResult:
    ise: float
    p_value: float
    n_permutations: int
    seed: RngSeed
    null_quantiles: dict[float, float]
    bandwidth: Bandwidth2D
    grid: Grid
    n_a: int
    n_b: int
    n_exceed: int


def max_threads() -> int:
    try:
        return max(1, int(os.environ.get("SHIFTLAB_MAX_THREADS", "1")))
    except ValueError:
        return 1


def permutation_test(
    points_a,
    points_b,
    grid_spec: GridSpec = GridSpec(),
    n_perm: int = 999,
    seed: int | RngSeed = 0,
    bandwidth: Bandwidth2D | None = None,
    threads: int | None = None,
) -> ShiftTestResult:
    """Global two-sample test of equal densities with the ISE statistic.

    The bandwidth and grid come from the pooled sample and stay fixed across
    relabelings. Replicate ``i`` draws from its own spawned generator, so the
    result does not depend on the thread count.
    """
    a = _as_points(points_a)
    b = _as_points(points_b)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise EmptySample("both samples must be non-empty")
    if n_perm < MIN_PERMUTATIONS:
        raise InputError(f"need at least {MIN_PERMUTATIONS} permutations, got {n_perm}")
    seed = as_seed(seed)
    pooled = np.vstack([a, b])
    na, N = a.shape[0], pooled.shape[0]
    bw = bandwidth or bandwidth_rule(pooled)
    grid = make_grid(pooled, bw, grid_spec)
    _check_coverage(pooled, bw, grid, 3.0)
    kx = _kernel(grid.xs, pooled[:, 0], bw.hx)
    ky = _kernel(grid.ys, pooled[:, 1], bw.hy)
    w = grid.weights()

    def stat(ia: np.ndarray, ib: np.ndarray) -> float:
        fa = (kx[:, ia] @ ky[:, ia].T) / ia.size
        fb = (kx[:, ib] @ ky[:, ib].T) / ib.size
        return _ise_values(fa, fb, w)

    observed = stat(np.arange(na), np.arange(na, N))
    rngs = seed.spawn(n_perm)

    def replicate(i: int) -> float:
        perm = rngs[i].permutation(N)
        return stat(perm[:na], perm[na:])

    workers = threads or max_threads()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            null = np.array(list(ex.map(replicate, range(n_perm))))
    else:
        null = np.array([replicate(i) for i in range(n_perm)])
    exceed = int(np.sum(null >= observed))
    q = np.quantile(null, NULL_QUANTILES)
    return ShiftTestResult(
        ise=observed,
        p_value=(1 + exceed) / (1 + n_perm),
        n_permutations=n_perm,
        seed=seed,
        null_quantiles={p: float(v) for p, v in zip(NULL_QUANTILES, q)},
        bandwidth=bw,
        grid=grid,
        n_a=na,
        n_b=N - na,
        n_exceed=exceed,
    )


def split_window(events: Sequence[EventRecord], anchor: dt.date, window_days: int):
    """Located events in ``[anchor - w, anchor)`` and ``[anchor, anchor + w)``."""
    if window_days < 1:
        raise InputError(f"window must be at least one day, got {window_days}")
    lo = anchor - dt.timedelta(days=window_days)
    hi = anchor + dt.timedelta(days=window_days)
    before = [e.location for e in events if e.location is not None and lo <= e.date < anchor]
    after = [e.location for e in events if e.location is not None and anchor <= e.date < hi]
    if not before:
        raise EmptyWindow("before")
    if not after:
        raise EmptyWindow("after")
    return _as_points(before), _as_points(after)


def windowed_densities(
    events: Sequence[EventRecord],
    anchor: dt.date,
    window_days: int,
    grid_spec: GridSpec = GridSpec(),
) -> tuple[Density2D, Density2D]:
    before, after = split_window(events, anchor, window_days)
    pooled = np.vstack([before, after])
    bw = bandwidth_rule(pooled)
    grid = make_grid(pooled, bw, grid_spec)
    return estimate_density(before, bw, grid), estimate_density(after, bw, grid)


def windowed_shift_test(
    events: Sequence[EventRecord],
    anchor: dt.date,
    window_days: int,
    grid_spec: GridSpec = GridSpec(),
    n_perm: int = 999,
    seed: int | RngSeed = 0,
) -> tuple[ShiftTestResult, Density2D, Density2D]:
    before, after = split_window(events, anchor, window_days)
    res = permutation_test(before, after, grid_spec, n_perm, seed)
    f_before = estimate_density(before, res.bandwidth, res.grid)
    f_after = estimate_density(after, res.bandwidth, res.grid)
    return res, f_before, f_after
