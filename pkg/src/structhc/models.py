"""Data generation for the multiple-blocks models on a line, a square grid of
rectangles, or a square grid of lattice balls.

Noise comes from a counter-based generator keyed by (seed, stream): the value
at cell ``k`` depends only on the seed and ``k``, so any slice of the grid can
be regenerated independently.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import Optional

import numpy as np
from scipy import special

from . import theory
from .errors import ConfigurationError
from .regions import Ball, Interval, Rectangle, ball_profile

NOISE_STREAM = 0
PLACEMENT_STREAM = 1
REJECTION_CAP = 10_000

_SHAPES = {1: ("interval",), 2: ("rectangle", "ball")}


def _key(seed: int, stream: int) -> np.ndarray:
    return np.random.SeedSequence([int(seed) & (2 ** 64 - 1), stream]).generate_state(2, np.uint64)


def counter_normals(seed: int, stream: int, start: int, count: int) -> np.ndarray:
    """Standard normals number ``start .. start+count-1`` of stream ``(seed, stream)``."""
    bg = np.random.Philox(key=_key(seed, stream))
    bg.advance(start // 4)
    skip = start % 4
    raw = bg.random_raw(count + skip)[skip:]
    u = ((raw >> np.uint64(11)).astype(float) + 0.5) * 2.0 ** -53
    return -special.ndtri(u)


def placement_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=_key(seed, PLACEMENT_STREAM)))


@dataclass(frozen=True)
class SignalConfig:
    n: int
    alpha: float
    beta: float
    r: float = 0.0
    d: int = 1
    shape: str = "interval"
    regime: str = "sparse"
    placement: str = "free_disjoint"
    seed: int = 0
    # overrides the calibrated amplitude, e.g. 0.0 for null data
    mu_override: Optional[float] = None

    def __post_init__(self):
        if self.d not in _SHAPES:
            raise ConfigurationError(f"d must be 1 or 2 (got {self.d})")
        if self.shape not in _SHAPES[self.d]:
            raise ConfigurationError(f"shape {self.shape!r} not available for d={self.d}")
        if self.n < 1:
            raise ConfigurationError("n must be positive")
        if not (0.0 <= self.alpha < 1.0) or not (self.alpha + self.beta > 0.0) or self.alpha + self.beta > 1.0 + 1e-12:
            raise ConfigurationError(f"need 0 <= alpha < 1 and 0 < alpha + beta <= 1 (got {self.alpha}, {self.beta})")
        if self.regime not in ("sparse", "dense", "auto"):
            raise ConfigurationError(f"unknown regime {self.regime!r}")
        if self.placement not in ("free_disjoint", "grid_aligned"):
            raise ConfigurationError(f"unknown placement {self.placement!r}")

    @property
    def effective_regime(self) -> str:
        if self.regime != "auto":
            return self.regime
        return "sparse" if self.beta / (1.0 - self.alpha) > 0.5 else "dense"

    @property
    def cells(self) -> int:
        return self.n ** self.d

    @property
    def side(self) -> int:
        """Side length of square blocks (d=2 rectangles)."""
        return max(1, round(self.n ** self.alpha))

    @property
    def ball_r2(self) -> float:
        """Squared radius of the truth balls: lattice count closest to n^(2 alpha)."""
        target = self.n ** (2.0 * self.alpha)
        best = None
        k = 0
        while True:
            r2 = k + 0.5
            size = int(np.sum(2 * ball_profile(r2) + 1))
            gap = abs(size - target)
            if best is None or gap < best[0]:
                best = (gap, r2)
            if size > target:
                break
            k += 1
        return best[1]

    @property
    def block_cells(self) -> int:
        if self.shape == "interval":
            return max(1, round(self.n ** self.alpha))
        if self.shape == "rectangle":
            return self.side ** 2
        return int(np.sum(2 * ball_profile(self.ball_r2) + 1))

    @property
    def m(self) -> int:
        return max(1, round(self.n ** (self.d * (1.0 - self.alpha - self.beta))))

    @property
    def mu(self) -> float:
        return calibrated_mu(self) if self.mu_override is None else float(self.mu_override)

    def with_seed(self, seed: int) -> "SignalConfig":
        return replace(self, seed=seed)

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(mu=self.mu, m=self.m, block_cells=self.block_cells)
        return out


def calibrated_mu(config: SignalConfig) -> float:
    """Per-cell amplitude for the configured regime and dimension."""
    n, a, r = config.n, config.alpha, config.r
    regime = config.effective_regime
    if regime == "sparse":
        if r < 0:
            raise ConfigurationError("sparse calibration needs r >= 0")
        return math.sqrt(2.0 * r * math.log(n ** config.d)) / math.sqrt(n ** (config.d * a))
    if config.d != 1:
        raise ConfigurationError("no dense calibration for d = 2")
    return n ** r / math.sqrt(n ** a)


def boundary_gap(config: SignalConfig) -> float:
    """``r`` minus the optimal detection boundary at the configured (alpha, beta)."""
    return config.r - theory.rho_star(config.alpha, config.beta).rho_star


@dataclass
class Dataset:
    cells: np.ndarray
    truth: list
    config: SignalConfig

    @property
    def mu(self) -> float:
        return self.config.mu

    def signal_mask(self) -> np.ndarray:
        mask = np.zeros(self.cells.shape, dtype=bool)
        for reg in self.truth:
            mask |= reg.mask(self.cells.shape)
        return mask


def noise(config: SignalConfig) -> np.ndarray:
    shape = (config.n,) * config.d
    return counter_normals(config.seed, NOISE_STREAM, 0, config.cells).reshape(shape)


def _place_intervals(cfg: SignalConfig, rng) -> list:
    n, b, m = cfg.n, cfg.block_cells, cfg.m
    if cfg.placement == "grid_aligned":
        tiles = n // b
        if m > tiles:
            raise ConfigurationError(f"{m} aligned blocks of {b} do not fit in {n}")
        picks = np.sort(rng.choice(tiles, size=m, replace=False))
        return [Interval(int(t) * b, int(t) * b + b) for t in picks]
    free = n - m * b
    # gap bijection: m sorted slots among free + m positions
    slots = np.sort(rng.choice(free + m, size=m, replace=False))
    starts = slots + np.arange(m) * (b - 1)
    return [Interval(int(s), int(s) + b) for s in starts]


def _overlaps(boxes: np.ndarray, extent: np.ndarray) -> bool:
    """Axis-aligned overlap test between any two of the given (row, col) origins."""
    dr = np.abs(boxes[:, None, 0] - boxes[None, :, 0])
    dc = np.abs(boxes[:, None, 1] - boxes[None, :, 1])
    clash = (dr < extent[0]) & (dc < extent[1])
    np.fill_diagonal(clash, False)
    return bool(clash.any())


def _balls_overlap(centers: np.ndarray, r2: float) -> bool:
    """Exact lattice test: two equal open balls share a cell iff some cell is in both."""
    prof = ball_profile(r2)
    R = len(prof) // 2
    cells = {(dy, dx) for dy in range(-R, R + 1) for dx in range(-prof[dy + R], prof[dy + R] + 1)}
    for i in range(len(centers)):
        for j in range(i + 1, len(centers)):
            oy, ox = centers[j] - centers[i]
            if abs(oy) > 2 * R or abs(ox) > 2 * R:
                continue
            if any((y - oy, x - ox) in cells for (y, x) in cells):
                return True
    return False


def _place_2d(cfg: SignalConfig, rng) -> list:
    n, m = cfg.n, cfg.m
    if cfg.shape == "rectangle":
        s = cfg.side
        lo, hi, extent = 0, n - s, (s, s)
    else:
        r2 = cfg.ball_r2
        R = len(ball_profile(r2)) // 2
        s = 2 * R + 1
        # integer centers with the whole ball on the grid
        lo, hi, extent = R + 1, n - R, (s, s)
    if hi < lo:
        raise ConfigurationError("block larger than the grid")
    if cfg.placement == "grid_aligned":
        per = n // s
        if m > per * per:
            raise ConfigurationError(f"{m} aligned blocks do not fit")
        picks = rng.choice(per * per, size=m, replace=False)
        origin = np.column_stack([picks // per, picks % per]) * s
        if cfg.shape == "rectangle":
            return [Rectangle((int(a), int(a) + s), (int(c), int(c) + s)) for a, c in origin]
        return [Ball((int(a) + R + 1, int(c) + R + 1), r2) for a, c in origin]
    for _ in range(REJECTION_CAP):
        pos = rng.integers(lo, hi + 1, size=(m, 2))
        if cfg.shape == "rectangle":
            if m == 1 or not _overlaps(pos, np.array(extent)):
                return [Rectangle((int(a), int(a) + s), (int(c), int(c) + s)) for a, c in pos]
        elif m == 1 or not _balls_overlap(pos, r2):
            return [Ball((int(a), int(c)), r2) for a, c in pos]
    raise ConfigurationError(f"no disjoint placement of {m} blocks after {REJECTION_CAP} draws")


def generate(config: SignalConfig) -> Dataset:
    """Noise plus amplitude ``mu`` on ``m`` disjoint blocks placed at random."""
    if config.m * config.block_cells > config.cells:
        raise ConfigurationError(f"{config.m} blocks of {config.block_cells} cells exceed the grid")
    rng = placement_rng(config.seed)
    truth = _place_intervals(config, rng) if config.d == 1 else _place_2d(config, rng)
    cells = noise(config)
    mu = config.mu
    if mu != 0.0:
        for reg in truth:
            cells[reg.mask(cells.shape)] += mu
    return Dataset(cells, truth, config)
