"""Standard normal tail utilities and region p-values."""
from __future__ import annotations

import math

import numpy as np
from scipy import special

from .errors import DomainError

P_FLOOR = 1e-300
P_CEIL = 1.0 - 1e-16


def upper_tail(z):
    """Return 1 - Phi(z) for scalar or array input.

    Uses ``erfc`` directly for z >= 0 and the reflection ``1 - upper_tail(-z)``
    otherwise, so the small tail is never obtained by cancellation.
    """
    arr = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("upper_tail requires finite input")
    pos = arr >= 0
    out = np.empty_like(arr)
    out[pos] = 0.5 * special.erfc(arr[pos] / math.sqrt(2.0))
    out[~pos] = 1.0 - 0.5 * special.erfc(-arr[~pos] / math.sqrt(2.0))
    if out.ndim == 0:
        return float(out)
    return out


def clamp_p(p):
    """Clip p-values into [1e-300, 1 - 1e-16] so logs and ratios stay finite."""
    out = np.clip(p, P_FLOOR, P_CEIL)
    if np.ndim(out) == 0:
        return float(out)
    return out


def upper_tail_inv(p, tol: float = 1e-12):
    """Inverse of :func:`upper_tail` on (0, 1).

    A bracketing bisection on the (monotone) tail function seeded by the
    logit scale, finished with Newton steps in log space.
    """
    arr = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise DomainError("upper_tail_inv requires p in (0, 1)")
    flat = arr.ravel()
    out = np.array([_inv_scalar(float(v), tol) for v in flat]).reshape(arr.shape)
    if out.ndim == 0:
        return float(out)
    return out


def _log_tail(z: float) -> float:
    # log(1 - Phi(z)), stable for large positive z
    return float(special.log_ndtr(-z))


def _inv_scalar(p: float, tol: float) -> float:
    if p == 0.5:
        return 0.0
    if p > 0.5:
        return -_inv_scalar(1.0 - p, tol) if 1.0 - p != 0.5 else 0.0
    # p < 1/2: root is positive; 1 - Phi(z) <= exp(-z^2/2)/2 gives an upper bracket
    lo, hi = 0.0, math.sqrt(-2.0 * math.log(2.0 * p)) + 1.0
    target = math.log(p)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _log_tail(mid) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-6:
            break
    z = 0.5 * (lo + hi)
    for _ in range(8):
        # d/dz log(1 - Phi(z)) = -phi(z) / (1 - Phi(z))
        lt = _log_tail(z)
        logpdf = -0.5 * z * z - 0.5 * math.log(2.0 * math.pi)
        step = (lt - target) / (-math.exp(logpdf - lt))
        z -= step
        if abs(step) < tol * max(1.0, abs(z)):
            break
    return z


def region_pvalue(data, region) -> float:
    """p-value of the standardized sum of ``data`` over ``region``.

    Out-of-bounds regions raise ``IndexError``.
    """
    arr = np.asarray(data, dtype=float)
    mask = region.mask(arr.shape)
    size = region.size
    agg = float(arr[mask].sum()) / math.sqrt(size)
    return clamp_p(upper_tail(agg))
