"""Structured (level-rescaled) goodness-of-fit statistics and the penalized scan.

For each level the standardized sums ``X(I) = sum_{I} X / sqrt(|I|)`` of all
approximating regions are turned into p-values, a goodness-of-fit statistic
is evaluated on the ``n_l`` p-values of that level, the result is rescaled by
``sqrt(N / (2^l n_l))`` (HC) or ``N / (2^l n_l)`` (BJ and the divergence
family) with ``N`` the number of grid cells, and the maximum over levels is
reported.

Two evaluation paths are provided.  ``method="reference"`` computes every
p-value and sorts each level.  ``method="pruned"`` histograms the z-values,
bounds the statistic inside each histogram bucket from the bucket's rank
range and z-range, discards buckets that cannot reach the best value found so
far, and refines the survivors until only a few thousand values remain to be
sorted.  Both paths evaluate the same summands on the same p-values, so they
return identical numbers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import gof
from .errors import ConfigurationError, DomainError, ResourceGuardError
from .gauss import P_CEIL, P_FLOOR, clamp_p, upper_tail
from .regions import ApproxLevel, Interval, Region

ALL_INTERVALS_MAX_N = 2 ** 14
PRUNE_ABOVE = 100_000

# first-pass histogram over z in [_Z_LO, _Z_HI) plus two open-ended buckets
_Z_LO, _Z_HI, _Z_STEP = -1.0, 41.0, 1.0 / 512.0
_REFINE = 64
_EXACT_BELOW = 50_000
_MAX_ROUNDS = 6


# ---------------------------------------------------------------------------
# families


@dataclass(frozen=True)
class Family:
    """Goodness-of-fit family: ``hc``, ``hc+`` (indicator variant), ``bj`` or ``phi``."""

    kind: str
    s: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("hc", "hc+", "bj", "phi"):
            raise ConfigurationError(f"unknown family {self.kind!r}")
        if self.kind == "phi":
            if self.s is None or not -1.0 <= self.s <= 2.0:
                raise DomainError(f"divergence index {self.s} outside [-1, 2]")

    @property
    def root_scaled(self) -> bool:
        return self.kind in ("hc", "hc+")

    @property
    def nonnegative(self) -> bool:
        return self.kind != "hc"

    def terms(self, i, n: int, p) -> np.ndarray:
        if self.kind == "hc":
            return gof.hc_terms(i, n, p)
        if self.kind == "hc+":
            return gof.hc_terms(i, n, p, plus=True)
        if self.kind == "bj":
            return gof.bj_terms(i, n, p)
        return gof.phi_terms(i, n, p, self.s)

    def label(self, structured: bool = True) -> str:
        base = {"hc": "HC", "hc+": "HC+", "bj": "BJ"}.get(self.kind)
        if base is None:
            base = f"S({self.s:g})"
        return ("s" + base) if structured else base


def parse_family(spec) -> Family:
    """Accept a :class:`Family`, ``"hc"``, ``"hc+"``, ``"bj"``, ``"phi:<s>"`` or ``("phi", s)``."""
    if isinstance(spec, Family):
        return spec
    if isinstance(spec, tuple):
        return Family(spec[0], float(spec[1]) if len(spec) > 1 else None)
    text = str(spec).strip().lower()
    for prefix in ("phi:", "ss:", "s:"):
        if text.startswith(prefix):
            return Family("phi", float(text[len(prefix):]))
    aliases = {"hc": "hc", "shc": "hc", "hc+": "hc+", "hcplus": "hc+", "shc+": "hc+", "bj": "bj", "sbj": "bj"}
    if text not in aliases:
        raise ConfigurationError(f"unknown family {spec!r}")
    return Family(aliases[text])


@dataclass
class StatValue:
    name: str
    value: float
    arg_level: Optional[int] = None
    arg_region: Optional[Region] = None
    per_level: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        region = None
        if self.arg_region is not None:
            region = {"kind": self.arg_region.kind, "bounds": list(map(_plain, self.arg_region.bounds()))}
        return {"name": self.name, "value": self.value, "level": self.arg_level, "region": region}


def _plain(x):
    return x.item() if hasattr(x, "item") else x


# ---------------------------------------------------------------------------
# aggregation


class Aggregator:
    """Standardized region sums via prefix sums (1-d), a summed-area table
    (rectangles) or per-row prefix sums (balls)."""

    def __init__(self, data):
        self.data = np.asarray(data, dtype=float)
        if not np.all(np.isfinite(self.data)):
            raise DomainError("data must be finite")
        self._cs = self._sat = self._rows = None

    def level(self, lev: ApproxLevel) -> np.ndarray:
        out = np.empty(lev.n_ell)
        pos = 0
        for b in lev.blocks:
            seg = out[pos:pos + b.count]
            if lev.kind == "interval":
                self._intervals(b, seg)
            elif lev.kind == "rectangle":
                self._rects(b, seg)
            else:
                self._balls(b, seg)
            pos += b.count
        return out

    def _intervals(self, b, out):
        if self._cs is None:
            self._cs = np.concatenate(([0.0], np.cumsum(self.data)))
        cs = self._cs
        np.subtract(cs[b.length::b.step][:b.count], cs[0::b.step][:b.count], out=out)
        out *= 1.0 / math.sqrt(b.length)

    def _rects(self, b, out):
        if self._sat is None:
            n1, n2 = self.data.shape
            S = np.zeros((n1 + 1, n2 + 1))
            S[1:, 1:] = np.cumsum(np.cumsum(self.data, axis=0), axis=1)
            self._sat = S
        S = self._sat
        c1, c2 = b.count_rows, b.count_cols
        hi = S[b.len_rows::b.step_rows][:c1]
        lo = S[0::b.step_rows][:c1]
        v = hi[:, b.len_cols::b.step_cols][:, :c2] - hi[:, 0::b.step_cols][:, :c2]
        v -= lo[:, b.len_cols::b.step_cols][:, :c2]
        v += lo[:, 0::b.step_cols][:, :c2]
        out[:] = v.ravel()
        out *= 1.0 / math.sqrt(b.len_rows * b.len_cols)

    def _balls(self, b, out):
        if self._rows is None:
            n1, n2 = self.data.shape
            P = np.zeros((n1, n2 + 1))
            P[:, 1:] = np.cumsum(self.data, axis=1)
            self._rows = P
        P = self._rows
        m, d, f = b.count_axis, b.step, b.first
        R = len(b.profile) // 2
        acc = np.zeros((m, m))
        for t, h in enumerate(b.profile):
            rows = P[f - 1 + t - R::d][:m]
            acc += rows[:, f + h::d][:, :m]
            acc -= rows[:, f - 1 - h::d][:, :m]
        out[:] = acc.ravel()
        out *= 1.0 / math.sqrt(int(np.sum(2 * b.profile + 1)))


def level_pvalues(data, lev: ApproxLevel) -> np.ndarray:
    """Clamped p-values of every region of ``lev`` in scan order."""
    return clamp_p(upper_tail(Aggregator(data).level(lev)))


def _check_levels(data, levels):
    if not levels:
        raise ConfigurationError("empty level list")
    lev = levels[0]
    ndim = 1 if lev.kind == "interval" else 2
    arr = np.asarray(data)
    if arr.ndim != ndim or any(s != lev.n for s in arr.shape):
        raise ConfigurationError(f"levels built for side {lev.n} in {ndim}-d, data has shape {arr.shape}")


def level_scale(lev: ApproxLevel, family: Family) -> float:
    c = lev.grid_cells / (2.0 ** lev.level * lev.n_ell)
    return math.sqrt(c) if family.root_scaled else c


# ---------------------------------------------------------------------------
# per-level evaluation


def level_stat_reference(z: np.ndarray, family: Family) -> tuple:
    """Unscaled statistic on one level by a full sort.

    Returns ``(value, flat_index)`` where ``flat_index`` is the first region in
    scan order carrying the maximizing p-value (``-1`` if the statistic takes
    its default value 0).
    """
    n = z.size
    h = n // 2
    p = clamp_p(upper_tail(z))
    ps = np.sort(p)[:h]
    terms = family.terms(np.arange(1, h + 1), n, ps)
    k = int(np.argmax(terms))
    val = float(terms[k])
    if family.nonnegative and val <= 0.0:
        return 0.0, -1
    hit = np.flatnonzero(p == ps[k])
    return val, int(hit.min())


class _Buckets:
    """Disjoint z-ranges ordered by decreasing z with known rank offsets."""

    def __init__(self, lo, hi, counts, members=None):
        self.lo = lo
        self.hi = hi
        self.counts = counts
        # rank offset: elements in buckets with larger z
        self.offset = np.concatenate(([0], np.cumsum(counts)[:-1])).astype(np.int64)
        self.members = members


def _edge_p(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    fin = np.isfinite(z)
    if fin.any():
        out[fin] = clamp_p(upper_tail(z[fin]))
    out[z == np.inf] = P_FLOOR
    out[z == -np.inf] = P_CEIL
    return out


def _bounds(bk: _Buckets, n: int, family: Family) -> tuple:
    """Per-bucket upper and lower bounds on the largest summand of ranks <= n/2."""
    h = n // 2
    live = (bk.counts > 0) & (bk.offset + 1 <= h)
    r = np.minimum(bk.offset + bk.counts, h).astype(float)
    r = np.where(live, r, 1.0)
    # slack keeps float edge rounding on the safe side
    with np.errstate(invalid="ignore"):
        pad_hi = bk.hi + 1e-9 * np.maximum(1.0, np.abs(bk.hi))
        pad_lo = bk.lo - 1e-9 * np.maximum(1.0, np.abs(bk.lo))
    ub = family.terms(r, n, _edge_p(pad_hi))
    lb = family.terms(r, n, _edge_p(pad_lo))
    ub = np.where(live, ub, -np.inf)
    lb = np.where(live, lb, -np.inf)
    return ub, lb


def _first_pass(z: np.ndarray) -> _Buckets:
    nb = int(round((_Z_HI - _Z_LO) / _Z_STEP))
    t = z - _Z_LO
    t *= 1.0 / _Z_STEP
    np.clip(t, -1.0, nb, out=t)
    np.floor(t, out=t)
    b = t.astype(np.int64)
    b += 1  # 0: below range, 1..nb: inner, nb+1: above range
    # inner bucket k covers [lo + (k-1) step, lo + k step); reverse so z decreases
    cnt = np.bincount(b, minlength=nb + 2)[::-1].copy()
    edges = _Z_LO + _Z_STEP * np.arange(nb + 1)
    lo = np.concatenate(([_Z_HI], edges[:-1][::-1], [-np.inf]))
    hi = np.concatenate(([np.inf], edges[1:][::-1], [_Z_LO]))
    bk = _Buckets(lo, hi, cnt)
    bk.codes = (nb + 1) - b  # bucket position in decreasing-z order
    return bk


def _refine(z: np.ndarray, bk: _Buckets, keep: np.ndarray) -> _Buckets:
    """Split the kept buckets into ``_REFINE`` equal z-slices each."""
    sel = np.flatnonzero(keep)
    mask = keep[bk.codes]
    members = np.flatnonzero(mask) if bk.members is None else bk.members[mask]
    codes = bk.codes[mask]
    zz = z[members]
    slot_of = np.full(keep.size, -1, dtype=np.int64)
    slot_of[sel] = np.arange(sel.size)
    slot = slot_of[codes]  # parent position among kept buckets
    lo, hi = bk.lo[sel], bk.hi[sel]
    finite = np.isfinite(lo) & np.isfinite(hi)
    width = np.where(finite, hi - lo, 1.0)
    # sub-bucket 0 holds the largest z of its parent
    f = (hi[slot] - zz) / width[slot] * _REFINE
    f = np.where(finite[slot], f, 0.0)
    sub = np.clip(f.astype(np.int64), 0, _REFINE - 1)
    new_code = slot * _REFINE + sub
    k = np.arange(_REFINE)
    new_hi = np.where(finite[:, None], hi[:, None] - k * (width[:, None] / _REFINE), hi[:, None])
    new_lo = np.where(finite[:, None], hi[:, None] - (k + 1) * (width[:, None] / _REFINE), lo[:, None])
    new_lo[:, -1] = lo
    new_hi[:, 0] = hi
    cnt = np.bincount(new_code, minlength=sel.size * _REFINE)
    out = _Buckets(new_lo.ravel(), new_hi.ravel(), cnt)
    # parents keep their global rank offsets; children add within-parent counts
    parent_off = bk.offset[sel]
    within = np.cumsum(cnt.reshape(sel.size, _REFINE), axis=1) - cnt.reshape(sel.size, _REFINE)
    out.offset = (parent_off[:, None] + within).ravel()
    out.codes = new_code
    out.members = members
    return out


def _exact(z: np.ndarray, bk: _Buckets, keep: np.ndarray, n: int, family: Family) -> tuple:
    h = n // 2
    mask = keep[bk.codes]
    members = np.flatnonzero(mask) if bk.members is None else bk.members[mask]
    codes = bk.codes[mask]
    zz = z[members]
    order = np.lexsort((members, -zz, codes))
    members, codes, zz = members[order], codes[order], zz[order]
    start = np.searchsorted(codes, codes, side="left")
    rank = bk.offset[codes] + (np.arange(codes.size) - start) + 1
    ok = rank <= h
    if not ok.any():
        return -np.inf, -1
    members, zz, rank = members[ok], zz[ok], rank[ok]
    p = clamp_p(upper_tail(zz))
    terms = family.terms(rank.astype(float), n, p)
    k = int(np.argmax(terms))
    val = float(terms[k])
    if family.nonnegative and val <= 0.0:
        return 0.0, -1
    return val, int(members[p == p[k]].min())


def level_stat_pruned(z: np.ndarray, family: Family, scale: float, floor: float) -> tuple:
    """Unscaled per-level statistic, or ``(-inf, -1)`` if ``scale * value < floor``.

    ``floor`` is a lower bound on the overall maximum; levels that provably
    stay below it are not evaluated exactly.
    """
    n = z.size
    bk = _first_pass(z)
    ub, lb = _bounds(bk, n, family)
    floor = max(floor, scale * float(lb.max()))
    keep = scale * ub >= floor
    rounds = 0
    while keep.any() and int(bk.counts[keep].sum()) > _EXACT_BELOW and rounds < _MAX_ROUNDS:
        bk = _refine(z, bk, keep)
        ub, lb = _bounds(bk, n, family)
        floor = max(floor, scale * float(lb.max()))
        keep = scale * ub >= floor
        rounds += 1
    if not keep.any():
        return -np.inf, -1
    val, idx = _exact(z, bk, keep, n, family)
    if scale * val < floor and not (family.nonnegative and val == 0.0):
        return -np.inf, -1
    return val, idx


# ---------------------------------------------------------------------------
# public statistics


def structured_stat(data, levels, family="hc", method: str = "auto") -> StatValue:
    """Maximum over levels of the rescaled goodness-of-fit statistic.

    ``method`` is ``"reference"``, ``"pruned"`` or ``"auto"`` (pruned only on
    levels with more than ``PRUNE_ABOVE`` regions, where it pays off).  The
    reference path fills ``per_level`` with every level's scaled value; the
    pruned path only records levels it evaluated exactly.
    """
    fam = parse_family(family)
    _check_levels(data, levels)
    if method not in ("auto", "pruned", "reference"):
        raise ConfigurationError(f"unknown method {method!r}")
    agg = Aggregator(data)
    best = (-np.inf, None, -1)
    per_level = {}
    for lev in levels:
        if lev.n_ell < 2:
            continue
        z = agg.level(lev)
        scale = level_scale(lev, fam)
        if method == "reference" or (method == "auto" and lev.n_ell <= PRUNE_ABOVE):
            val, idx = level_stat_reference(z, fam)
        else:
            val, idx = level_stat_pruned(z, fam, scale, best[0])
            if val == -np.inf:
                continue
        scaled = scale * val
        per_level[lev.level] = scaled
        if scaled > best[0]:
            best = (scaled, lev, idx)
    if best[1] is None:
        raise ConfigurationError("no level holds two or more regions")
    value, lev, idx = best
    region = lev.region(idx) if idx >= 0 else None
    return StatValue(fam.label(True), float(value), lev.level, region, per_level)


def unstructured_stat(data, family="hc") -> StatValue:
    """Plain HC / BJ / divergence statistic on the cell-wise p-values."""
    fam = parse_family(family)
    x = np.asarray(data, dtype=float)
    z = x.ravel()
    val, idx = level_stat_reference(z, fam)
    region = None
    if idx >= 0:
        if x.ndim == 1:
            region = Interval(idx, idx + 1)
        else:
            from .regions import Rectangle

            i, j = divmod(idx, x.shape[1])
            region = Rectangle((i, i + 1), (j, j + 1))
    return StatValue(fam.label(False), val, 0, region)


def scan_penalty(size, n: int):
    return np.sqrt(2.0 * np.log(math.e * n / np.asarray(size, dtype=float)))


def penalized_scan(data, mode: str = "all_intervals", levels=None) -> StatValue:
    """Max over intervals of ``X(I) - sqrt(2 log(e n / |I|))``.

    ``all_intervals`` scans every interval by increasing length (``n <= 2^14``);
    ``approx`` scans the univariate approximating set.
    """
    x = np.asarray(data, dtype=float)
    if x.ndim != 1:
        raise ConfigurationError("penalized scan is univariate")
    n = x.size
    if mode == "all_intervals":
        if n > ALL_INTERVALS_MAX_N:
            raise ResourceGuardError(f"all-interval scan limited to n <= {ALL_INTERVALS_MAX_N}; use mode='approx'")
        cs = np.concatenate(([0.0], np.cumsum(x)))
        best = (-np.inf, None)
        for L in range(1, n + 1):
            v = (cs[L:] - cs[:-L]) / math.sqrt(L) - math.sqrt(2.0 * math.log(math.e * n / L))
            j = int(np.argmax(v))
            if v[j] > best[0]:
                best = (float(v[j]), Interval(j, j + L))
        return StatValue("Pn", best[0], None, best[1])
    if mode != "approx":
        raise ConfigurationError(f"unknown scan mode {mode!r}")
    if levels is None:
        from .regions import build_interval_levels

        levels = build_interval_levels(n)
    _check_levels(x, levels)
    if levels[0].kind != "interval":
        raise ConfigurationError("penalized scan needs interval levels")
    agg = Aggregator(x)
    best = (-np.inf, None, None)
    for lev in levels:
        z = agg.level(lev)
        pen = np.repeat([math.sqrt(2.0 * math.log(math.e * n / b.length)) for b in lev.blocks],
                        [b.count for b in lev.blocks])
        v = z - pen
        j = int(np.argmax(v))
        if v[j] > best[0]:
            best = (float(v[j]), lev.level, lev.region(j))
    return StatValue("PnApp", best[0], best[1], best[2])


STAT_NAMES = ("shc", "shc+", "sbj", "ss:<s>", "hc", "hc+", "bj", "pn", "pnapp")


def evaluate(data, name: str, shape: str = "interval", levels=None) -> StatValue:
    """Evaluate a statistic by its short name (see ``STAT_NAMES``)."""
    from .regions import build_levels

    key = name.strip().lower()
    x = np.asarray(data, dtype=float)
    if key in ("pn", "pnapp"):
        if key == "pn":
            return penalized_scan(x, "all_intervals")
        return penalized_scan(x, "approx", levels)
    if key in ("hc", "hc+", "bj"):
        return unstructured_stat(x, key)
    if key.startswith("s") and key != "s":
        fam = parse_family(key if key.startswith("ss:") else key[1:])
        if levels is None:
            levels = build_levels(x.shape[0], shape)
        return structured_stat(x, levels, fam)
    raise ConfigurationError(f"unknown statistic {name!r}")
