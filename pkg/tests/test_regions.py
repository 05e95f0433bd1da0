import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import coverage_ok, paint_max_balls, paint_max_intervals, paint_max_rects, raster_symdiff
from structhc.errors import ConfigurationError, DomainError
from structhc.regions import (
    Ball,
    Interval,
    Rectangle,
    approximate_region,
    ball_profile,
    ball_symdiff_bound,
    build_ball_levels,
    build_interval_levels,
    build_levels,
    build_rectangle_levels,
    interval_lmax,
    symdiff_sizes,
)


def brute_ball_cells(center, r2, n):
    ii, jj = np.meshgrid(np.arange(1, n + 1), np.arange(1, n + 1), indexing="ij")
    return (ii - center[0]) ** 2 + (jj - center[1]) ** 2 < r2


# --- regions -----------------------------------------------------------------


def test_interval_cells():
    iv = Interval(3, 7)
    assert iv.size == 4
    m = iv.mask((10,))
    assert m.sum() == 4 and m[3] and m[6] and not m[7]


def test_rectangle_cells():
    r = Rectangle((1, 3), (2, 6))
    assert r.size == 8 == r.mask((8, 8)).sum()


@pytest.mark.parametrize("center,r2", [((5, 5), 4.0), ((6, 7), 2.5), ((9, 9), 17.3), ((4, 4), 1.0)])
def test_ball_is_open_and_sized_by_cells(center, r2):
    b = Ball(center, r2)
    brute = brute_ball_cells(center, r2, 16)
    assert np.array_equal(b.mask((16, 16)), brute)
    assert b.size == brute.sum()


def test_ball_profile_matches_ball():
    for r2 in (1.0, 2.0, 4.0, 7.5, 32.0):
        assert int(np.sum(2 * ball_profile(r2) + 1)) == Ball((20, 20), r2).size


def test_region_out_of_grid():
    with pytest.raises(IndexError):
        Interval(5, 12).mask((10,))
    with pytest.raises(IndexError):
        Rectangle((0, 3), (7, 11)).mask((10, 10))
    with pytest.raises(IndexError):
        Ball((2, 2), 9.0).mask((10, 10))


# --- interval levels ----------------------------------------------------------


def test_interval_level_zero_example():
    lev = build_interval_levels(64)[0]
    assert lev.grid_step == 1
    assert lev.epsilon == pytest.approx(1 / (6 * math.sqrt(7)))
    assert lev.n_ell == 64 and lev.i_max == 1
    assert np.array_equal(lev.bounds_array(), np.column_stack([np.arange(64), np.arange(1, 65)]))


@pytest.mark.parametrize("n", [16, 100, 1024, 5000])
def test_top_level_epsilon(n):
    levels = build_interval_levels(n)
    assert len(levels) == interval_lmax(n) + 1
    assert levels[-1].epsilon == pytest.approx(1 / 12)


def test_interval_levels_reject_small_n():
    with pytest.raises(ConfigurationError):
        build_interval_levels(15)


@pytest.mark.parametrize("n", [64, 200, 1024])
def test_interval_level_definition(n):
    for lev in build_interval_levels(n):
        B = lev.bounds_array()
        L = B[:, 1] - B[:, 0]
        d = lev.grid_step
        assert d == math.ceil(lev.epsilon * 2.0 ** (lev.level - 1))
        assert np.all(B % d == 0) and np.all(B[:, 1] <= n) and np.all(B[:, 0] >= 0)
        assert np.all((2 * L > 2 ** lev.level) & (L <= 2 ** lev.level))
        # every admissible interval is present
        expect = sum((n - k) // d + 1 for k in range(d, 2 ** lev.level + 1, d) if 2 * k > 2 ** lev.level and k <= n)
        assert lev.n_ell == expect
        assert np.array_equal(lev.sizes(), L)


def test_interval_cardinality_example_n1024():
    n = 1024
    for lev in build_interval_levels(n):
        assert lev.n_ell <= 144 * n * 2.0 ** -lev.level * math.log2(n)


@pytest.mark.parametrize("n", [64, 256])
def test_interval_groups_disjoint_and_partition(n):
    for lev in build_interval_levels(n):
        assert paint_max_intervals(lev) == 1
        assert coverage_ok(lev)
        L = lev.shift_period
        assert set(len(g) for g in lev.groups) <= {n // L, n // L - 1}


def test_region_lookup_consistent():
    lev = build_interval_levels(300)[4]
    B = lev.bounds_array()
    for i in (0, 7, lev.n_ell - 1):
        assert lev.region(i).bounds() == tuple(B[i])
    with pytest.raises(IndexError):
        lev.region(lev.n_ell)


# --- rectangles ---------------------------------------------------------------


def test_rectangles_d1_are_intervals():
    assert build_rectangle_levels(256, 1) is build_interval_levels(256)
    for a, b in zip(build_rectangle_levels(100, 1), build_interval_levels(100)):
        assert np.array_equal(a.bounds_array(), b.bounds_array())


def test_rectangles_reject_d3():
    with pytest.raises(ConfigurationError):
        build_rectangle_levels(64, 3)


def test_rectangle_levels_n64():
    n = 64
    levels = build_rectangle_levels(n)
    assert len(levels) == math.ceil(math.log2((n / 8) ** 2)) + 1
    total = sum(lev.n_ell for lev in levels)
    assert total <= (288 * 2 * n * math.log2(n)) ** 2
    mmax = interval_lmax(n)
    for lev in levels:
        lv = lev.level
        B = lev.bounds_array()
        L1, L2 = B[:, 1] - B[:, 0], B[:, 3] - B[:, 2]
        area = L1 * L2
        assert np.all((2 * area > 2 ** lv) & (area <= 2 ** lv))
        l1 = np.ceil(np.log2(L1)).astype(int)
        l2 = np.ceil(np.log2(L2)).astype(int)
        assert np.all((l1 + l2 >= lv) & (l1 + l2 <= lv + 1))
        assert l1.max() <= mmax and l2.max() <= mmax
        sizes = np.bincount(lev.group_ids)
        assert sizes.min() >= math.floor(9 / 16 * n * n / 2 ** lv)
        assert sizes.max() <= math.ceil(2 * n * n / 2 ** lv)
        assert lev.i_max <= 12 * lev.epsilon ** -4 * (lv + 1)
        assert paint_max_rects(lev) == 1
        assert coverage_ok(lev)


# --- balls ----------------------------------------------------------------------


def test_ball_levels_n64():
    n = 64
    levels = build_ball_levels(n)
    bound = sum(2 * n * n * 2.0 ** -lev.level * (math.sqrt(math.log2(n * n)) + 1) ** 3 for lev in levels)
    assert sum(lev.n_ell for lev in levels) <= bound
    for lev in levels:
        B = lev.bounds_array()
        r = np.sqrt(B[:, 2])
        assert np.all((B[:, 2] >= 2.0 ** (lev.level - 1)) & (B[:, 2] <= 2.0 ** lev.level * (1 + 1e-12)))
        assert np.all(B[:, :2] % lev.grid_step == 0)
        assert np.all((B[:, 0] >= r) & (B[:, 0] <= n - r + 1) & (B[:, 1] >= r) & (B[:, 1] <= n - r + 1))
        assert paint_max_balls(lev) == 1
        assert coverage_ok(lev)


def test_ball_cells_inside_grid():
    for lev in build_ball_levels(32):
        for i in (0, lev.n_ell // 2, lev.n_ell - 1):
            reg = lev.region(i)
            assert reg.mask((32, 32)).sum() == reg.size == lev.sizes()[i]


def test_build_levels_dispatch():
    assert build_levels(64, "rect") is build_rectangle_levels(64, 2)
    assert build_levels(64, "ball") is build_ball_levels(64)
    with pytest.raises(ConfigurationError):
        build_levels(64, "hexagon")


# --- approximation ----------------------------------------------------------------


def test_self_approximation():
    levels = build_interval_levels(256)
    target = levels[3].region(5)
    assert approximate_region(target, levels) == (target, 0)
    rl = build_rectangle_levels(64)
    t = rl[5].region(11)
    assert approximate_region(t, rl) == (t, 0)
    bl = build_ball_levels(64)
    b = bl[4].region(3)
    reg, sd = approximate_region(b, bl)
    assert sd == 0 and np.array_equal(reg.mask((64, 64)), b.mask((64, 64)))


def test_tie_break_prefers_lowest_level():
    levels = build_interval_levels(64)
    # length 2: exact member at level 1
    reg, sd = approximate_region(Interval(10, 12), levels)
    assert (reg, sd) == (Interval(10, 12), 0)


def test_interval_approximation_bound_sample():
    n = 256
    levels = build_interval_levels(n)
    rng = np.random.default_rng(4)
    for _ in range(300):
        L = int(rng.integers(1, n // 8 + 1))
        j = int(rng.integers(0, n - L + 1))
        lv = max(0, math.ceil(math.log2(L)))
        sd = symdiff_sizes(Interval(j, j + L), levels[lv]).min()
        assert sd <= 2 * levels[lv].grid_step
        assert approximate_region(Interval(j, j + L), levels)[1] <= sd


def test_ball_approximation_relative_bound():
    n = 64
    levels = build_ball_levels(n)
    rng = np.random.default_rng(0)
    for _ in range(30):
        R2 = float(np.exp(rng.uniform(0, math.log(n * n / 8))))
        R = math.sqrt(R2)
        c = tuple(int(v) for v in rng.integers(math.ceil(R), math.floor(n - R + 1) + 1, size=2))
        t = Ball(c, R2)
        reg, sd = approximate_region(t, levels)
        assert sd == np.count_nonzero(t.mask((n, n)) ^ reg.mask((n, n)))
        assert sd <= 3 * t.size / math.sqrt(math.log2(n * n / t.size))


def test_approximation_domain_errors():
    levels = build_interval_levels(64)
    with pytest.raises(DomainError):
        approximate_region(Interval(0, 9), levels)  # longer than n/8
    with pytest.raises(DomainError):
        approximate_region(Rectangle((0, 2), (0, 2)), levels)
    with pytest.raises(DomainError):
        approximate_region(Ball((2, 2), 9.0), build_ball_levels(64))
    with pytest.raises(DomainError):
        approximate_region(Ball((30, 30), 0.5), build_ball_levels(64))


# --- symmetric-difference bound ------------------------------------------------------


def test_symdiff_bound_examples():
    assert ball_symdiff_bound(1.0, 1.0, 0.0) == 0.0
    assert ball_symdiff_bound(1.0, 1.0, 1.0) == pytest.approx(2 * math.pi)
    assert ball_symdiff_bound(2.0, 1.0, 0.0) == pytest.approx(3 * math.pi)
    # fine-lattice area of the two configurations stays under the bound
    assert raster_symdiff(1.0, 1.0, 1.0, h=0.005) <= 2 * math.pi
    assert raster_symdiff(2.0, 1.0, 0.0, h=0.005) == pytest.approx(3 * math.pi, rel=1e-3)


def test_symdiff_bound_domain():
    with pytest.raises(DomainError):
        ball_symdiff_bound(1.0, 2.0, 0.0)
    with pytest.raises(DomainError):
        ball_symdiff_bound(1.0, 0.0, 0.0)
    with pytest.raises(DomainError):
        ball_symdiff_bound(1.0, 1.0, -1.0)


@settings(max_examples=150, deadline=None)
@given(st.floats(0.5, 20.0), st.floats(0.05, 1.0), st.floats(0.0, 10.0))
def test_raster_symdiff_within_bound_plus_boundary_slack(R, frac, dist):
    r = R * frac
    assert raster_symdiff(R, r, dist) <= ball_symdiff_bound(R, r, dist) + 8 * max(R, 1.0)


@pytest.mark.parametrize("target", [Ball((6, 3), 1.3), Ball((16, 16), 20.0), Ball((10, 22), 7.5)])
def test_ball_symdiff_sizes_match_masks(target):
    n = 32
    tm = target.mask((n, n))
    for lev in build_ball_levels(n):
        brute = np.array([np.count_nonzero(tm ^ reg.mask((n, n))) for reg in lev.regions])
        assert np.array_equal(symdiff_sizes(target, lev), brute)


def test_rect_symdiff_sizes_match_masks():
    n = 32
    target = Rectangle((3, 6), (10, 12))
    tm = target.mask((n, n))
    for lev in build_rectangle_levels(n)[:4]:
        brute = np.array([np.count_nonzero(tm ^ reg.mask((n, n))) for reg in lev.regions])
        assert np.array_equal(symdiff_sizes(target, lev), brute)
