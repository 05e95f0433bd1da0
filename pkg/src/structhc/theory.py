"""Detection boundaries and finite-sample tail bounds in closed form."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError


@dataclass(frozen=True)
class BoundaryResult:
    rho_star: float
    branch: str
    note: str = ""
    # HC without structure needs its base boundary times n**scaling_exponent
    scaling_exponent: float = 0.0


def _check(alpha: float, beta: float) -> float:
    if not (0.0 <= alpha < 1.0) or not (beta > 0.0) or alpha + beta > 1.0 + 1e-15:
        raise DomainError(f"need 0 <= alpha < 1, beta > 0, alpha + beta <= 1 (got {alpha}, {beta})")
    return beta / (1.0 - alpha)


def _very_sparse(alpha: float, beta: float) -> float:
    return (math.sqrt(1.0 - alpha) - math.sqrt(max(1.0 - alpha - beta, 0.0))) ** 2


def sparsity_branch(alpha: float, beta: float) -> str:
    ratio = _check(alpha, beta)
    if ratio <= 0.5:
        return "dense"
    return "moderately_sparse" if ratio < 0.75 else "very_sparse"


def rho_star(alpha: float, beta: float) -> BoundaryResult:
    """Optimal detection boundary for m = n^(1-alpha-beta) blocks of length n^alpha."""
    branch = sparsity_branch(alpha, beta)
    if branch == "very_sparse":
        return BoundaryResult(_very_sparse(alpha, beta), branch, "sHC, sBJ and the penalized scan attain it")
    note = "sHC and sBJ attain it" if branch == "moderately_sparse" else "sHC, sBJ, HC and BJ attain it"
    return BoundaryResult(beta - (1.0 - alpha) / 2.0, branch, note)


def rho_star_pen(alpha: float, beta: float) -> BoundaryResult:
    """Detection boundary of the penalized scan."""
    ratio = _check(alpha, beta)
    if ratio == 0.5:
        raise DomainError("penalized-scan boundary is undefined at beta/(1-alpha) = 1/2")
    if ratio < 0.5:
        return BoundaryResult(beta - (1.0 - alpha) / 2.0, "dense", "dense calibration")
    branch = "moderately_sparse" if ratio < 0.75 else "very_sparse"
    return BoundaryResult(_very_sparse(alpha, beta), branch, "sparse calibration")


def rho_star_unstructured_hc(alpha: float, beta: float) -> BoundaryResult:
    """Boundary reached by HC applied to the raw observations.

    For ``beta > 1/2`` the result is the unstructured sparse boundary in ``beta``
    to be multiplied by ``n**alpha`` (reported as ``scaling_exponent``).
    """
    _check(alpha, beta)
    if beta > 0.5:
        if beta < 0.75:
            return BoundaryResult(beta - 0.5, "moderately_sparse", "times n^alpha", alpha)
        return BoundaryResult((1.0 - math.sqrt(1.0 - beta)) ** 2, "very_sparse", "times n^alpha", alpha)
    return BoundaryResult(beta - (1.0 - alpha) / 2.0, "dense", "dense calibration", 0.0)


# ---------------------------------------------------------------------------
# tail bounds


def _log_odds_ratio(a: float, b: float) -> float:
    if not 0.0 < a < b < 1.0:
        raise DomainError(f"need 0 < a < b < 1 (got {a}, {b})")
    return math.log(b * (1.0 - a) / (a * (1.0 - b)))


def _positive(eta: float) -> None:
    if not (eta > 0.0) or math.isinf(eta):
        raise DomainError(f"eta must be positive and finite (got {eta})")


def bj_tail_bound(eta: float, n: int, K: float) -> float:
    """Bound on P(BJ_n > eta) under the uniform null, for any K > 1."""
    _positive(eta)
    if not K > 1.0:
        raise DomainError(f"K must exceed 1 (got {K})")
    if n < 2:
        raise DomainError("n must be at least 2")
    val = 22.0 * K * math.log(n) * (eta + 1.0) * math.exp(-eta) + 2.0 * n ** (1.0 - K)
    return min(1.0, val)


def bb_sup_bound(eta: float, a: float, b: float) -> float:
    """Bound on P(sup_[a,b] U(t)/sqrt(t(1-t)) > eta) for a Brownian bridge U."""
    _positive(eta)
    lr = _log_odds_ratio(a, b)
    val = (2.0 / eta + eta * lr) / math.sqrt(2.0 * math.pi) * math.exp(-eta * eta / 2.0)
    return min(1.0, val)


def ks_loglik_bound(eta: float, a: float, b: float, n: int | None = None) -> float:
    """Bound on P(sup_[a,b] n KL(F_n(t) || t) > eta); free of n."""
    _positive(eta)
    lr = _log_odds_ratio(a, b)
    return min(1.0, 2.0 * math.e * (eta * lr + 1.0) * math.exp(-eta))


def hc_tail_bound(eta: float, n: int, C: float, D: float = 3.0) -> float:
    """``C / eta`` for ``eta >= sqrt(D log log n)``; ``C`` must be calibrated by simulation."""
    _positive(eta)
    if not D > 2.0:
        raise DomainError(f"D must exceed 2 (got {D})")
    if n < 16:
        raise DomainError("n must be at least 16")
    if eta < math.sqrt(D * math.log(math.log(n))):
        raise DomainError(f"eta below sqrt(D log log n) = {math.sqrt(D * math.log(math.log(n))):.4f}")
    if not C >= 0:
        raise DomainError("C must be non-negative")
    return min(1.0, C / eta)
