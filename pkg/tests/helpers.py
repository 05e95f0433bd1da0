import math

import numpy as np


def paint_max_intervals(lev):
    """Largest cover count of any cell within any group (1 means disjoint groups)."""
    B = lev.bounds_array()
    g = lev.group_ids
    D = np.zeros((lev.i_max, lev.n + 1), dtype=np.int32)
    np.add.at(D, (g, B[:, 0]), 1)
    np.add.at(D, (g, B[:, 1]), -1)
    return int(np.cumsum(D, axis=1).max())


def paint_max_rects(lev, chunk=400):
    B = lev.bounds_array()
    g = lev.group_ids
    n = lev.n
    worst = 0
    for g0 in range(0, lev.i_max, chunk):
        sel = (g >= g0) & (g < g0 + chunk)
        gg = g[sel] - g0
        b = B[sel]
        D = np.zeros((min(chunk, lev.i_max - g0), n + 1, n + 1), dtype=np.int32)
        np.add.at(D, (gg, b[:, 0], b[:, 2]), 1)
        np.add.at(D, (gg, b[:, 1], b[:, 2]), -1)
        np.add.at(D, (gg, b[:, 0], b[:, 3]), -1)
        np.add.at(D, (gg, b[:, 1], b[:, 3]), 1)
        worst = max(worst, int(np.cumsum(np.cumsum(D, axis=1), axis=2).max()))
    return worst


def paint_max_balls(lev):
    n = lev.n
    g = lev.group_ids
    D = np.zeros((lev.i_max, n + 2, n + 2), dtype=np.int32)
    pos = 0
    for b in lev.blocks:
        c = b.centers()
        X, Y = np.meshgrid(c, c, indexing="ij")
        X, Y = X.ravel(), Y.ravel()
        gb = g[pos:pos + b.count]
        R = len(b.profile) // 2
        for t, h in enumerate(b.profile):
            rows = X + (t - R)
            np.add.at(D, (gb, rows, Y - h), 1)
            np.add.at(D, (gb, rows, Y + h + 1), -1)
        pos += b.count
    return int(np.cumsum(D, axis=2).max())


def coverage_ok(lev):
    """Groups partition the level's regions and no region is listed twice."""
    allidx = np.sort(np.concatenate(lev.groups))
    if not np.array_equal(allidx, np.arange(lev.n_ell)):
        return False
    return np.unique(lev.bounds_array(), axis=0).shape[0] == lev.n_ell


def raster_symdiff(R, r, dist, h=1.0):
    """Cell count (times h^2) of B_R(0) symdiff B_r((dist, 0)) on a lattice of spacing h."""
    m = int(math.ceil((R + dist + 1) / h))
    ax = np.arange(-m, m + 1) * h
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    a = X ** 2 + Y ** 2 < R * R
    b = (X - dist) ** 2 + Y ** 2 < r * r
    return float(np.count_nonzero(a ^ b)) * h * h


# acceptance verdicts: criterion number -> list of (label, ok, detail)
RESULTS = {}


def verdict(criterion, label, ok, detail=""):
    RESULTS.setdefault(criterion, []).append((label, bool(ok), detail))
    print(f"criterion {criterion} [{label}]: {'PASS' if ok else 'FAIL'} {detail}")
    return bool(ok)
