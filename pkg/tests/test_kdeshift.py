import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from shiftlab.core import EventRecord
from shiftlab.errors import DegenerateSpread, EmptySample, EmptyWindow, GridMismatch, GridTooSmall, InputError
from shiftlab.kdeshift import (
    Bandwidth2D,
    Grid,
    GridSpec,
    analytic_normal_density,
    bandwidth_rule,
    estimate_density,
    ise,
    make_grid,
    permutation_test,
    windowed_densities,
    windowed_shift_test,
)

from oracles import gaussian_ise


def test_bandwidth_rule_standard_normal():
    pts = np.random.default_rng(0).normal(size=(1000, 2))
    bw = bandwidth_rule(pts)
    target = 1000 ** (-1 / 6)
    assert bw.hx == pytest.approx(target, rel=0.2)
    assert bw.hy == pytest.approx(target, rel=0.2)


def test_bandwidth_rule_degenerate():
    with pytest.raises(DegenerateSpread):
        bandwidth_rule([(1.0, 1.0)] * 10)
    with pytest.raises(DegenerateSpread) as exc:
        bandwidth_rule([(0.0, 1.0), (1.0, 1.0), (2.0, 1.0)])
    assert exc.value.axis == "y"


def test_bandwidth_rule_scale_equivariance():
    pts = np.random.default_rng(1).normal(size=(200, 2))
    a = bandwidth_rule(pts)
    b = bandwidth_rule(pts * [10.0, 1.0])
    assert b.hx == pytest.approx(10 * a.hx)
    assert b.hy == pytest.approx(a.hy)


def test_single_point_peak():
    bw = Bandwidth2D(0.5, 2.0)
    grid = Grid.from_bounds(-10, 10, -10, 10, 81, 81)  # node at the origin
    f = estimate_density([(0.0, 0.0)], bw, grid)
    assert f.values.max() == pytest.approx(1 / (2 * math.pi * 0.5 * 2.0))
    assert f.argmax() == (0.0, 0.0)


def test_coincident_points_equal_single_point():
    bw = Bandwidth2D(1.0, 1.0)
    grid = Grid.from_bounds(-5, 5, -5, 5, 41, 41)
    np.testing.assert_allclose(
        estimate_density([(0.0, 0.0)] * 7, bw, grid).values, estimate_density([(0.0, 0.0)], bw, grid).values
    )


def test_grid_too_small_and_empty():
    bw = Bandwidth2D(1.0, 1.0)
    with pytest.raises(GridTooSmall):
        estimate_density([(0.0, 0.0)], bw, Grid.from_bounds(-2, 2, -5, 5, 10, 10))
    with pytest.raises(EmptySample):
        estimate_density(np.empty((0, 2)), bw, Grid.from_bounds(-2, 2, -5, 5, 10, 10))
    with pytest.raises(InputError):
        GridSpec(1, 10)


def test_kde_recovers_standard_normal():
    pts = np.random.default_rng(2).normal(size=(10_000, 2))
    bw = bandwidth_rule(pts)
    grid = make_grid(pts, bw)
    f = estimate_density(pts, bw, grid)
    truth = analytic_normal_density((0.0, 0.0), 1.0, grid)
    assert np.max(np.abs(f.values - truth.values)) < 0.05


@given(st.integers(1, 60), st.floats(0.05, 3), st.floats(0.05, 3), st.integers(0, 2**32 - 1))
def test_density_nonnegative_and_mass(n, hx, hy, seed):
    pts = np.random.default_rng(seed).normal(0, 2, size=(n, 2))
    bw = Bandwidth2D(hx, hy)
    grid = make_grid(pts, bw, GridSpec(96, 96))
    f = estimate_density(pts, bw, grid)
    assert np.all(f.values >= 0)
    # quadrature only holds when the grid resolves the kernel
    assume(grid.dx <= hx / 2 and grid.dy <= hy / 2)
    assert 0.97 <= f.mass() <= 1.0 + 1e-9


def test_kde_linearity():
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=(30, 2)), rng.normal(1, 1, size=(70, 2))
    bw = Bandwidth2D(0.4, 0.6)
    grid = make_grid(np.vstack([a, b]), bw)
    fa, fb = estimate_density(a, bw, grid), estimate_density(b, bw, grid)
    fu = estimate_density(np.vstack([a, b]), bw, grid)
    np.testing.assert_allclose(fu.values, (30 * fa.values + 70 * fb.values) / 100, atol=1e-14)


def test_ise_identity_symmetry_and_mismatch():
    rng = np.random.default_rng(4)
    a, b = rng.normal(size=(40, 2)), rng.normal(size=(40, 2))
    bw = Bandwidth2D(0.5, 0.5)
    grid = make_grid(np.vstack([a, b]), bw)
    fa, fb = estimate_density(a, bw, grid), estimate_density(b, bw, grid)
    assert ise(fa, fa) == 0.0
    assert ise(fa, fb) == ise(fb, fa) > 0
    other = Grid.from_bounds(*grid.bounds[:3], grid.bounds[3] + 1, grid.nx, grid.ny)
    with pytest.raises(GridMismatch):
        ise(fa, analytic_normal_density((0, 0), 1, other))


@pytest.mark.parametrize("sigma,mu", [(1.0, 1.0), (0.5, 0.3), (2.0, 3.0)])
def test_ise_gaussian_closed_form(sigma, mu):
    grid = make_grid([(0, 0), (mu, 0)], Bandwidth2D(sigma, sigma), GridSpec(128, 128, padding=6))
    v = ise(analytic_normal_density((0, 0), sigma, grid), analytic_normal_density((mu, 0), sigma, grid))
    assert v == pytest.approx(gaussian_ise(mu, sigma), rel=0.02)


def test_permutation_identical_samples():
    a = np.random.default_rng(5).normal(size=(50, 2))
    r = permutation_test(a, a.copy(), n_perm=99, seed=1)
    assert r.ise == 0.0
    assert r.p_value == 1.0


def test_permutation_determinism_and_threads():
    rng = np.random.default_rng(6)
    a, b = rng.normal(size=(60, 2)), rng.normal(0.3, 1, size=(60, 2))
    r1 = permutation_test(a, b, GridSpec(48, 48), n_perm=99, seed=42)
    r2 = permutation_test(a, b, GridSpec(48, 48), n_perm=99, seed=42, threads=4)
    assert r1 == r2
    r3 = permutation_test(a, b, GridSpec(48, 48), n_perm=99, seed=43)
    assert r3.null_quantiles != r1.null_quantiles


def test_permutation_pvalue_formula_and_bounds():
    rng = np.random.default_rng(7)
    a, b = rng.normal(size=(80, 2)), rng.normal(4, 1, size=(80, 2))
    r = permutation_test(a, b, GridSpec(48, 48), n_perm=99, seed=0)
    assert r.p_value == (1 + r.n_exceed) / 100
    assert r.p_value == pytest.approx(1 / 100)
    assert r.n_permutations == 99 and r.n_a == 80 and r.n_b == 80


def test_permutation_errors():
    a = np.random.default_rng(8).normal(size=(10, 2))
    with pytest.raises(EmptySample):
        permutation_test(a, np.empty((0, 2)))
    with pytest.raises(InputError):
        permutation_test(a, a, n_perm=50)


def _events(points, day):
    return [EventRecord(day, (float(x), float(y)), {}) for x, y in points]


def test_windowed_empty_after():
    day = dt.date(2020, 3, 1)
    ev = _events(np.random.default_rng(0).normal(size=(20, 2)), day)
    with pytest.raises(EmptyWindow) as exc:
        windowed_densities(ev, dt.date(2020, 3, 10), 30)
    assert exc.value.side == "after"


def test_windowed_hotspot_shift():
    rng = np.random.default_rng(9)
    A, B = np.array([0.0, 0.0]), np.array([5.0, 3.0])
    anchor = dt.date(2020, 3, 15)
    ev = _events(rng.normal(A, 1.0, (400, 2)), anchor - dt.timedelta(days=5))
    ev += _events(rng.normal(B, 1.0, (400, 2)), anchor + dt.timedelta(days=5))
    fb, fa = windowed_densities(ev, anchor, 30)
    assert fb.bandwidth == fa.bandwidth and fb.grid == fa.grid
    h = fb.bandwidth.max
    assert np.linalg.norm(np.array(fb.argmax()) - A) <= h
    assert np.linalg.norm(np.array(fa.argmax()) - B) <= h


def test_windowed_identical_clouds_within_null():
    rng = np.random.default_rng(10)
    pts = rng.normal(size=(150, 2))
    anchor = dt.date(2020, 3, 15)
    ev = _events(pts, anchor - dt.timedelta(days=3)) + _events(pts, anchor + dt.timedelta(days=3))
    res, fb, fa = windowed_shift_test(ev, anchor, 30, GridSpec(64, 64), n_perm=199, seed=3)
    assert res.ise <= res.null_quantiles[0.95]
    assert ise(fb, fa) == res.ise
