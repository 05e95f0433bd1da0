"""Goodness-of-fit statistics on a sample of p-values.

All statistics sort their input, so any ordering of the p-values is accepted.
The maximum runs over the smallest half of the order statistics,
``1 <= i <= n // 2``.  Each function returns ``(value, index)`` where
``index`` is the 1-based rank attaining the maximum (``0`` when the
statistic defaults to 0 because no rank qualifies).
"""
from __future__ import annotations

import numpy as np

from .errors import DomainError
from .gauss import clamp_p

# below this distance from 0 or 1 the divergence index uses its KL limit
_S_LIMIT_TOL = 1e-8


def _prepare(p) -> np.ndarray:
    p = np.sort(np.asarray(p, dtype=float).ravel())
    if p.size < 2:
        raise DomainError("need at least two p-values")
    if np.isnan(p).any() or p[0] < 0 or p[-1] > 1:
        raise DomainError("p-values must lie in [0, 1]")
    return clamp_p(p)


def hc_terms(i, n: int, p, plus: bool = False) -> np.ndarray:
    """Higher-criticism summands at ranks ``i`` with p-values ``p``."""
    u = np.asarray(i, dtype=float) / n
    p = np.asarray(p, dtype=float)
    t = np.sqrt(n) * (u - p) / np.sqrt(p * (1.0 - p))
    if plus:
        t = np.where(p < u, t, 0.0)
    return t


def kl(u, v) -> np.ndarray:
    """Binary Kullback-Leibler divergence KL(u || v) with 0 log 0 = 0."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(u > 0, u * np.log(u / v), 0.0)
        b = np.where(u < 1, (1.0 - u) * np.log((1.0 - u) / (1.0 - v)), 0.0)
    return a + b


def divergence(u, v, s: float) -> np.ndarray:
    """Power-divergence K_s(u, v) between Bernoulli(u) and Bernoulli(v).

    ``s = 1`` is KL(u || v), ``s = 0`` is KL(v || u) and ``s = 2`` is
    ``(u - v)^2 / (2 v (1 - v))``.  Requires ``0 < u < 1`` and ``0 < v < 1``.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if abs(s - 1.0) < _S_LIMIT_TOL:
        return kl(u, v)
    if abs(s) < _S_LIMIT_TOL:
        return kl(v, u)
    # 1 - u^s v^(1-s) - (1-u)^s (1-v)^(1-s), factored around whichever
    # argument keeps the exponent in [-1, 1]
    if s <= 0.5:
        num = -v * np.expm1(s * np.log(u / v)) - (1.0 - v) * np.expm1(s * np.log1p((v - u) / (1.0 - v)))
    else:
        t = 1.0 - s
        num = -u * np.expm1(t * np.log(v / u)) - (1.0 - u) * np.expm1(t * np.log1p((u - v) / (1.0 - u)))
    return num / (s * (1.0 - s))


def phi_terms(i, n: int, p, s: float) -> np.ndarray:
    """``n * K_s(i/n, p)`` where ``p < i/n`` and 0 elsewhere."""
    u = np.asarray(i, dtype=float) / n
    p = np.asarray(p, dtype=float)
    fire = p < u
    out = np.zeros(np.broadcast(u, p).shape)
    if fire.any():
        ub, pb = np.broadcast_arrays(u, p)
        out[fire] = n * divergence(ub[fire], pb[fire], s)
    return out


def bj_terms(i, n: int, p) -> np.ndarray:
    """``i log(i/(n p)) + (n-i) log((1-i/n)/(1-p))`` where ``p < i/n``, else 0."""
    i = np.asarray(i, dtype=float)
    p = np.asarray(p, dtype=float)
    t = i * np.log(i / (n * p)) + (n - i) * np.log((1.0 - i / n) / (1.0 - p))
    return np.where(p < i / n, t, 0.0)


def _argmax(terms: np.ndarray, default_zero: bool) -> tuple:
    k = int(np.argmax(terms))
    val = float(terms[k])
    if default_zero and val <= 0.0:
        return 0.0, 0
    return val, k + 1


def hc(p, plus: bool = False) -> tuple:
    """One-sided higher criticism over the smallest half of the p-values.

    With ``plus=True`` ranks with ``p_(i) >= i/n`` contribute 0 instead of
    their (negative) standardized deviation.
    """
    p = _prepare(p)
    n = p.size
    h = n // 2
    terms = hc_terms(np.arange(1, h + 1), n, p[:h], plus=plus)
    return _argmax(terms, default_zero=plus)


def hc_plus(p) -> tuple:
    return hc(p, plus=True)


def phi_divergence(p, s: float) -> tuple:
    """Power-divergence statistic ``n max_i K_s(i/n, p_(i)) 1(p_(i) < i/n)``."""
    if not -1.0 <= s <= 2.0:
        raise DomainError(f"divergence index s={s} outside [-1, 2]")
    p = _prepare(p)
    n = p.size
    h = n // 2
    terms = phi_terms(np.arange(1, h + 1), n, p[:h], s)
    return _argmax(terms, default_zero=True)


def bj(p, two_sided: bool = False) -> tuple:
    """Berk-Jones statistic.

    The default is the one-sided log-likelihood-ratio form restricted to
    ranks with ``p_(i) < i/n``; it equals ``phi_divergence(p, 1)`` up to
    rounding but is evaluated independently.
    ``two_sided=True`` gives ``sup_t n KL(F_n(t) || t)`` over
    ``t in [p_(1), p_(n)]`` with no indicator and no restriction to the
    smaller half; the supremum sits at an order statistic, approached from
    either side.  The reported index is then the rank of that order statistic.
    """
    p = _prepare(p)
    n = p.size
    if not two_sided:
        h = n // 2
        return _argmax(bj_terms(np.arange(1, h + 1), n, p[:h]), default_zero=True)
    i = np.arange(1, n + 1)
    right = n * kl(i / n, p)
    left = n * kl((i - 1) / n, p)
    # F_n jumps to 1/n at p_(1), so the left limit there is outside the range
    left[0] = -np.inf
    terms = np.maximum(right, left)
    return _argmax(terms, default_zero=False)
