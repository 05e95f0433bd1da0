"""Multiscale approximating sets of intervals, rectangles and lattice balls.

Grid conventions: a univariate grid has points ``1..n``; an interval ``(j, k]``
covers points ``j+1..k`` (array slice ``j:k``).  Rectangles are products of
two such intervals, rows first.  Balls are open Euclidean balls around a
(1-based) center on the ``n x n`` lattice.

Every level stores its regions as a list of homogeneous blocks (one side
length / radius and one grid step per block) so that aggregation can run on
strided slices.  The flat "scan order" of a level is the concatenation of its
blocks.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import ClassVar, Union

import numpy as np

from .errors import ConfigurationError, DomainError


# ---------------------------------------------------------------------------
# regions


@dataclass(frozen=True)
class Interval:
    j: int
    k: int
    kind: ClassVar[str] = "interval"

    @property
    def size(self) -> int:
        return self.k - self.j

    def bounds(self) -> tuple:
        return (self.j, self.k)

    def mask(self, shape) -> np.ndarray:
        if len(shape) != 1:
            raise IndexError("interval needs a 1-d grid")
        if not 0 <= self.j < self.k <= shape[0]:
            raise IndexError(f"interval ({self.j}, {self.k}] outside grid of {shape[0]}")
        m = np.zeros(shape, dtype=bool)
        m[self.j:self.k] = True
        return m


@dataclass(frozen=True)
class Rectangle:
    rows: tuple
    cols: tuple
    kind: ClassVar[str] = "rectangle"

    @property
    def size(self) -> int:
        return (self.rows[1] - self.rows[0]) * (self.cols[1] - self.cols[0])

    def bounds(self) -> tuple:
        return (self.rows[0], self.rows[1], self.cols[0], self.cols[1])

    def mask(self, shape) -> np.ndarray:
        if len(shape) != 2:
            raise IndexError("rectangle needs a 2-d grid")
        (a, b), (c, d) = self.rows, self.cols
        if not (0 <= a < b <= shape[0] and 0 <= c < d <= shape[1]):
            raise IndexError(f"rectangle {self.bounds()} outside grid {shape}")
        m = np.zeros(shape, dtype=bool)
        m[a:b, c:d] = True
        return m


def _half_width(v: float) -> int:
    """Largest integer h >= 0 with h*h < v (v > 0)."""
    h = int(math.floor(math.sqrt(v)))
    while h > 0 and h * h >= v:
        h -= 1
    while (h + 1) * (h + 1) < v:
        h += 1
    return h


def ball_profile(r2: float) -> np.ndarray:
    """Half-widths of an open ball of squared radius ``r2`` around a lattice point.

    Entry ``t`` is the half-width of the row at vertical offset ``t - R``
    where ``R = len(profile) // 2``.
    """
    R = _half_width(r2)
    return np.array([_half_width(r2 - dy * dy) for dy in range(-R, R + 1)], dtype=np.int64)


@dataclass(frozen=True)
class Ball:
    """Open ball ``{(i, j) : (i - cx)^2 + (j - cy)^2 < r2}`` on the 1-based lattice."""

    center: tuple
    r2: float
    kind: ClassVar[str] = "ball"

    @property
    def radius(self) -> float:
        return math.sqrt(self.r2)

    def bounds(self) -> tuple:
        return (self.center[0], self.center[1], self.r2)

    def spans(self) -> list:
        """Row spans ``(row, col_min, col_max)``, 1-based and inclusive."""
        cx, cy = self.center
        r = math.sqrt(self.r2)
        out = []
        for i in range(math.floor(cx - r), math.ceil(cx + r) + 1):
            v = self.r2 - (i - cx) ** 2
            if v <= 0:
                continue
            s = math.sqrt(v)
            lo = math.ceil(cy - s)
            while (lo - cy) ** 2 >= v:
                lo += 1
            while (lo - 1 - cy) ** 2 < v:
                lo -= 1
            hi = math.floor(cy + s)
            while (hi - cy) ** 2 >= v:
                hi -= 1
            while (hi + 1 - cy) ** 2 < v:
                hi += 1
            if hi >= lo:
                out.append((i, lo, hi))
        return out

    @property
    def size(self) -> int:
        return sum(hi - lo + 1 for _, lo, hi in self.spans())

    def mask(self, shape) -> np.ndarray:
        if len(shape) != 2:
            raise IndexError("ball needs a 2-d grid")
        m = np.zeros(shape, dtype=bool)
        for i, lo, hi in self.spans():
            if not (1 <= i <= shape[0] and 1 <= lo and hi <= shape[1]):
                raise IndexError(f"ball {self.bounds()} leaves grid {shape}")
            m[i - 1, lo - 1:hi] = True
        return m


Region = Union[Interval, Rectangle, Ball]


# ---------------------------------------------------------------------------
# blocks and levels


@dataclass(frozen=True)
class IntervalBlock:
    length: int
    step: int
    count: int

    def starts(self) -> np.ndarray:
        return self.step * np.arange(self.count, dtype=np.int64)


@dataclass(frozen=True)
class RectBlock:
    len_rows: int
    len_cols: int
    step_rows: int
    step_cols: int
    count_rows: int
    count_cols: int

    @property
    def count(self) -> int:
        return self.count_rows * self.count_cols


@dataclass(frozen=True)
class BallBlock:
    r2: float
    profile: np.ndarray = field(compare=False, repr=False)
    step: int
    first: int  # smallest center coordinate (1-based), a multiple of step
    count_axis: int

    @property
    def count(self) -> int:
        return self.count_axis * self.count_axis

    def centers(self) -> np.ndarray:
        return self.first + self.step * np.arange(self.count_axis, dtype=np.int64)


@dataclass
class ApproxLevel:
    """One level of an approximating set together with its disjoint grouping."""

    kind: str
    n: int
    level: int
    epsilon: float
    grid_step: int
    shift_period: int
    blocks: list = field(repr=False)

    @functools.cached_property
    def group_ids(self) -> np.ndarray:
        """Group label of every region in scan order (computed on first use)."""
        keys = []
        for bi, b in enumerate(self.blocks):
            if self.kind == "interval":
                res = (b.starts() % self.shift_period) // b.step
                keys.append(np.column_stack([np.full(b.count, bi), res]))
            elif self.kind == "rectangle":
                r = ((b.step_rows * np.arange(b.count_rows)) % b.len_rows) // b.step_rows
                c = ((b.step_cols * np.arange(b.count_cols)) % b.len_cols) // b.step_cols
                R, C = np.meshgrid(r, c, indexing="ij")
                keys.append(np.column_stack([np.full(b.count, bi), R.ravel(), C.ravel()]))
            else:
                res = ((b.centers() - b.step) % self.shift_period) // b.step
                X, Y = np.meshgrid(res, res, indexing="ij")
                keys.append(np.column_stack([np.full(b.count, bi), X.ravel(), Y.ravel()]))
        if not keys:
            return np.zeros(0, dtype=np.int64)
        return _dense_ids(np.concatenate(keys))

    @property
    def n_ell(self) -> int:
        return int(sum(b.count for b in self.blocks))

    @property
    def i_max(self) -> int:
        return int(self.group_ids.max()) + 1 if self.group_ids.size else 0

    @property
    def grid_cells(self) -> int:
        return self.n if self.kind == "interval" else self.n * self.n

    @functools.cached_property
    def groups(self) -> list:
        order = np.argsort(self.group_ids, kind="stable")
        cuts = np.flatnonzero(np.diff(self.group_ids[order])) + 1
        return np.split(order, cuts)

    @functools.cached_property
    def offsets(self) -> np.ndarray:
        return np.concatenate(([0], np.cumsum([b.count for b in self.blocks]))).astype(np.int64)

    def bounds_array(self) -> np.ndarray:
        """Region coordinates in scan order.

        intervals: ``[j, k]``; rectangles: ``[j1, k1, j2, k2]``;
        balls: ``[cx, cy, r2]`` (float).
        """
        parts = []
        for b in self.blocks:
            if self.kind == "interval":
                s = b.starts()
                parts.append(np.column_stack([s, s + b.length]))
            elif self.kind == "rectangle":
                rs = b.step_rows * np.arange(b.count_rows, dtype=np.int64)
                cs = b.step_cols * np.arange(b.count_cols, dtype=np.int64)
                R, C = np.meshgrid(rs, cs, indexing="ij")
                R, C = R.ravel(), C.ravel()
                parts.append(np.column_stack([R, R + b.len_rows, C, C + b.len_cols]))
            else:
                c = b.centers().astype(float)
                X, Y = np.meshgrid(c, c, indexing="ij")
                parts.append(np.column_stack([X.ravel(), Y.ravel(), np.full(X.size, b.r2)]))
        width = {"interval": 2, "rectangle": 4, "ball": 3}[self.kind]
        if not parts:
            return np.zeros((0, width))
        return np.concatenate(parts)

    def sizes(self) -> np.ndarray:
        """Cell counts |I| in scan order."""
        out = []
        for b in self.blocks:
            if self.kind == "interval":
                sz = b.length
            elif self.kind == "rectangle":
                sz = b.len_rows * b.len_cols
            else:
                sz = int(np.sum(2 * b.profile + 1))
            out.append(np.full(b.count, sz, dtype=np.int64))
        return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)

    def region(self, index: int) -> Region:
        """Region at flat position ``index`` of the scan order."""
        if not 0 <= index < self.n_ell:
            raise IndexError(index)
        bi = int(np.searchsorted(self.offsets, index, side="right")) - 1
        b = self.blocks[bi]
        loc = int(index - self.offsets[bi])
        if self.kind == "interval":
            j = b.step * loc
            return Interval(j, j + b.length)
        if self.kind == "rectangle":
            a, c = divmod(loc, b.count_cols)
            r0, c0 = b.step_rows * a, b.step_cols * c
            return Rectangle((r0, r0 + b.len_rows), (c0, c0 + b.len_cols))
        a, c = divmod(loc, b.count_axis)
        return Ball((b.first + b.step * a, b.first + b.step * c), b.r2)

    @property
    def regions(self) -> list:
        return [self.region(i) for i in range(self.n_ell)]


def _dense_ids(keys: np.ndarray) -> np.ndarray:
    """Consecutive ids for the distinct rows of a non-negative integer key matrix."""
    keys = np.asarray(keys, dtype=np.int64)
    flat = np.zeros(len(keys), dtype=np.int64)
    for col in keys.T:
        flat = flat * (int(col.max()) + 1) + col
    _, inv = np.unique(flat, return_inverse=True)
    return inv.reshape(-1).astype(np.int64)


def _ceil_log2_ratio(num: int, den: int) -> int:
    """Smallest l >= 0 with 2**l * den >= num."""
    lv = 0
    while (1 << lv) * den < num:
        lv += 1
    return lv


def _lengths(step: int, lv: int) -> list:
    """Multiples of ``step`` in (2**(lv-1), 2**lv]."""
    top = 1 << lv
    out = []
    L = step
    while L <= top:
        if 2 * L > top:
            out.append(L)
        L += step
    return out


# ---------------------------------------------------------------------------
# univariate intervals


def interval_lmax(n: int) -> int:
    return _ceil_log2_ratio(n, 8)


def interval_epsilon(n: int, lv: int) -> float:
    return 1.0 / (6.0 * math.sqrt(interval_lmax(n) - lv + 4))


@functools.lru_cache(maxsize=32)
def build_interval_levels(n: int) -> tuple:
    """Approximating intervals for levels ``0..ceil(log2(n/8))``.

    Groups follow the shift construction: intervals whose left endpoints
    agree modulo ``L_l`` (the largest multiple of ``d_l`` not above ``2**l``)
    and that share a length form one group of pairwise disjoint intervals.
    """
    if n < 16:
        raise ConfigurationError(f"interval levels need n >= 16, got {n}")
    levels = []
    for lv in range(interval_lmax(n) + 1):
        eps = interval_epsilon(n, lv)
        d = math.ceil(eps * 2.0 ** (lv - 1))
        shift = d * ((1 << lv) // d)
        blocks = [IntervalBlock(L, d, (n - L) // d + 1) for L in _lengths(d, lv) if L <= n]
        levels.append(ApproxLevel("interval", n, lv, eps, d, shift, blocks))
    return tuple(levels)


# ---------------------------------------------------------------------------
# rectangles


def rectangle_epsilon(n: int, d: int, lv: int) -> float:
    return 1.0 / (6.0 * math.sqrt(d * math.log2(n) - lv + 1))


@functools.lru_cache(maxsize=16)
def build_rectangle_levels(n: int, d: int = 2) -> tuple:
    """Cross-product approximating rectangles on the ``n^d`` grid.

    For ``d == 1`` this is exactly :func:`build_interval_levels`.  For
    ``d == 2`` level ``l`` holds the rectangles of volume in
    ``(2**(l-1), 2**l]`` whose sides come from univariate approximating sets
    at marginal levels ``0..ceil(log2(n/8))`` built with the level's own
    precision.  Rectangles with the same side lengths are grouped by the
    residues of their corners modulo the side lengths.
    """
    if d == 1:
        return build_interval_levels(n)
    if d != 2:
        raise ConfigurationError(f"rectangles supported for d in (1, 2), got {d}")
    if n < 16:
        raise ConfigurationError(f"rectangle levels need n >= 16, got {n}")
    mmax = interval_lmax(n)
    lmax = _ceil_log2_ratio(n * n, 64)
    levels = []
    for lv in range(lmax + 1):
        eps = rectangle_epsilon(n, 2, lv)
        side = {}
        for li in range(mmax + 1):
            step = math.ceil(eps * 2.0 ** (li - 1))
            side[li] = (step, [L for L in _lengths(step, li) if L <= n])
        blocks = []
        top = 1 << lv
        for l1 in range(mmax + 1):
            d1, lens1 = side[l1]
            for L1 in lens1:
                for l2 in range(mmax + 1):
                    d2, lens2 = side[l2]
                    for L2 in lens2:
                        area = L1 * L2
                        if not (top < 2 * area and area <= top):
                            continue
                        blocks.append(RectBlock(L1, L2, d1, d2, (n - L1) // d1 + 1, (n - L2) // d2 + 1))
        gstep = max((b.step_rows for b in blocks), default=1)
        gstep = max([gstep] + [b.step_cols for b in blocks])
        levels.append(ApproxLevel("rectangle", n, lv, eps, gstep, 0, blocks))
    return tuple(levels)


# ---------------------------------------------------------------------------
# lattice balls


def ball_lmax(n: int) -> int:
    return _ceil_log2_ratio(n * n, 8)


def ball_epsilon(n: int, lv: int) -> float:
    return 1.0 / math.sqrt(2.0 * math.log2(n) - lv + 1)


def ball_radii2(n: int, lv: int) -> list:
    eps = ball_epsilon(n, lv)
    return [2.0 ** (lv - 1 + i * eps) for i in range(int(math.floor(1.0 / eps)) + 1)]


@functools.lru_cache(maxsize=16)
def build_ball_levels(n: int) -> tuple:
    """Approximating open balls for volume levels ``0..ceil(log2(n^2/8))``.

    Squared radii follow the geometric progression ``2**(l-1+i*eps)``; centers
    sit on multiples of ``d_l`` with the ball inside the grid.  Radii whose
    lattice ball coincides with that of a smaller radius at the same level are
    dropped (identical cell sets).  Groups are the shift classes of the
    centers modulo ``L_l`` (smallest multiple of ``d_l`` >= twice the largest
    radius), one group per class and radius.
    """
    if n < 16:
        raise ConfigurationError(f"ball levels need n >= 16, got {n}")
    levels = []
    for lv in range(ball_lmax(n) + 1):
        eps = ball_epsilon(n, lv)
        d = math.ceil(eps * 2.0 ** ((lv - 1) / 2.0))
        kept, seen = [], []
        for r2 in ball_radii2(n, lv):
            r = math.sqrt(r2)
            first_m = math.ceil(r / d)
            last_m = math.floor((n - r + 1) / d)
            if last_m < first_m:
                continue
            prof = ball_profile(r2)
            kept.append((r2, prof, first_m, last_m))
        if not kept:
            continue
        rmax = max(math.sqrt(k[0]) for k in kept)
        period = d * math.ceil(2.0 * rmax / d)
        blocks = []
        for r2, prof, first_m, last_m in kept:
            if any(len(prof) == len(p) and np.array_equal(prof, p) for p in seen):
                continue
            seen.append(prof)
            blocks.append(BallBlock(r2, prof, d, first_m * d, last_m - first_m + 1))
        levels.append(ApproxLevel("ball", n, lv, eps, d, period, blocks))
    return tuple(levels)


def build_levels(n: int, shape: str = "interval") -> tuple:
    if shape == "interval":
        return build_interval_levels(n)
    if shape in ("rect", "rectangle"):
        return build_rectangle_levels(n, 2)
    if shape == "ball":
        return build_ball_levels(n)
    raise ConfigurationError(f"unknown shape {shape!r}")


# ---------------------------------------------------------------------------
# approximation queries


def ball_symdiff_bound(R: float, r: float, dist: float) -> float:
    """Area bound on ``|B_R(0) symdiff B_r(x)|`` for ``|x| = dist`` and ``0 < r <= R``."""
    if not (0 < r <= R) or dist < 0:
        raise DomainError("ball_symdiff_bound needs 0 < r <= R and dist >= 0")
    return (1.0 - r * r / (R * R) + 2.0 * dist / R) * math.pi * R * R


def _check_target(target: Region, n: int) -> None:
    if isinstance(target, Interval):
        if not (0 <= target.j < target.k <= n) or 8 * target.size > n:
            raise DomainError(f"interval {target.bounds()} outside the approximation range")
    elif isinstance(target, Rectangle):
        for lo, hi in (target.rows, target.cols):
            if not (0 <= lo < hi <= n) or 8 * (hi - lo) > n:
                raise DomainError(f"rectangle {target.bounds()} outside the approximation range")
    elif isinstance(target, Ball):
        R = target.radius
        if not (1.0 <= target.r2 <= n * n / 8.0):
            raise DomainError(f"ball radius^2 {target.r2} outside [1, n^2/8]")
        for c in target.center:
            if not (R <= c <= n - R + 1):
                raise DomainError(f"ball center {target.center} too close to the border")
    else:
        raise DomainError(f"unsupported region {target!r}")


def _ball_intersections(target: Ball, lev: ApproxLevel) -> np.ndarray:
    """Exact lattice intersection counts of ``target`` with every ball of ``lev``."""
    tspans = {i: (lo, hi) for i, lo, hi in target.spans()}
    out = []
    for b in lev.blocks:
        cen = b.centers()
        X, Y = np.meshgrid(cen, cen, indexing="ij")
        X, Y = X.ravel(), Y.ravel()
        inter = np.zeros(X.size, dtype=np.int64)
        R = len(b.profile) // 2
        near = (X - target.center[0]) ** 2 + (Y - target.center[1]) ** 2 < (math.sqrt(b.r2) + target.radius + 1) ** 2
        idx = np.flatnonzero(near)
        for t, h in enumerate(b.profile):
            rows = X[idx] + (t - R)
            # empty span sentinels; int64 extremes would overflow in c - a
            lo = np.full(idx.size, 1 << 40, dtype=np.int64)
            hi = np.full(idx.size, -(1 << 40), dtype=np.int64)
            for i, (tlo, thi) in tspans.items():
                sel = rows == i
                lo[sel] = tlo
                hi[sel] = thi
            a = np.maximum(lo, Y[idx] - h)
            c = np.minimum(hi, Y[idx] + h)
            inter[idx] += np.clip(c - a + 1, 0, None)
        out.append(inter)
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def symdiff_sizes(target: Region, lev: ApproxLevel) -> np.ndarray:
    """``|target symdiff R|`` for every region ``R`` of ``lev`` in scan order."""
    sizes = lev.sizes()
    if lev.kind == "interval":
        B = lev.bounds_array()
        ov = np.clip(np.minimum(B[:, 1], target.k) - np.maximum(B[:, 0], target.j), 0, None)
    elif lev.kind == "rectangle":
        B = lev.bounds_array()
        (a, b), (c, d) = target.rows, target.cols
        o1 = np.clip(np.minimum(B[:, 1], b) - np.maximum(B[:, 0], a), 0, None)
        o2 = np.clip(np.minimum(B[:, 3], d) - np.maximum(B[:, 2], c), 0, None)
        ov = o1 * o2
    else:
        ov = _ball_intersections(target, lev)
    return target.size + sizes - 2 * ov


def approximate_region(target: Region, levels) -> tuple:
    """Best approximating member of ``levels`` for ``target``.

    Returns ``(region, symmetric_difference)``.  Ties go to the lowest level,
    then to the lexicographically smallest coordinates.
    """
    if not levels:
        raise ConfigurationError("no levels")
    kind = levels[0].kind
    if target.kind != kind:
        raise DomainError(f"target is a {target.kind}, levels hold {kind}s")
    _check_target(target, levels[0].n)
    best = None
    for lev in levels:
        if lev.n_ell == 0:
            continue
        sd = symdiff_sizes(target, lev)
        m = sd.min()
        if best is not None and m >= best[0]:
            continue
        cand = np.flatnonzero(sd == m)
        B = lev.bounds_array()[cand]
        order = np.lexsort(B.T[::-1])
        best = (int(m), lev.region(int(cand[order[0]])))
    return best[1], best[0]
