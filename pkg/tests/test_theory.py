import math

import numpy as np
import pytest

from structhc.errors import DomainError
from structhc.theory import (
    bb_sup_bound,
    bj_tail_bound,
    hc_tail_bound,
    ks_loglik_bound,
    rho_star,
    rho_star_pen,
    rho_star_unstructured_hc,
    sparsity_branch,
)


def unstructured_boundary(beta):
    """Piecewise detection boundary without structure (sparse and dense branches)."""
    if beta > 0.5:
        return beta - 0.5 if beta <= 0.75 else (1 - math.sqrt(1 - beta)) ** 2
    return beta - 0.5


def test_rho_star_examples():
    assert rho_star(0.0, 0.6).rho_star == pytest.approx(0.1, abs=1e-15)
    assert rho_star(0.0, 0.8).rho_star == pytest.approx(0.30557280900008412, rel=1e-14)
    r = rho_star(0.2, 0.65)
    assert r.rho_star == pytest.approx(0.25717967697244908, rel=1e-14) and r.branch == "very_sparse"
    assert rho_star(0.2, 0.48).rho_star == pytest.approx(0.08, abs=1e-15)
    assert rho_star(0.2, 0.48).branch == "moderately_sparse"
    assert rho_star(0.3, 0.25).rho_star == pytest.approx(-0.10, abs=1e-15)
    assert rho_star(0.3, 0.25).branch == "dense"


@pytest.mark.parametrize("beta", [0.1, 0.35, 0.6, 0.9, 1.0])
def test_block_detection_case(beta):
    assert rho_star(1 - beta, beta).rho_star == pytest.approx(beta, abs=1e-12)


def test_unstructured_grid():
    for beta in np.linspace(0.01, 1.0, 100):
        assert rho_star(0.0, beta).rho_star == pytest.approx(unstructured_boundary(beta), abs=1e-12)


def test_continuity_at_three_quarters():
    for alpha in np.linspace(0, 0.9, 19):
        beta = 0.75 * (1 - alpha)
        a = beta - (1 - alpha) / 2
        b = (math.sqrt(1 - alpha) - math.sqrt(1 - alpha - beta)) ** 2
        assert abs(a - b) <= 1e-12
        assert rho_star(alpha, beta).rho_star == pytest.approx((1 - alpha) / 4, abs=1e-12)


def test_branch_labels():
    assert sparsity_branch(0.2, 0.4) == "dense"
    assert sparsity_branch(0.2, 0.41) == "moderately_sparse"
    assert sparsity_branch(0.2, 0.65) == "very_sparse"


@pytest.mark.parametrize("a,b", [(-0.1, 0.5), (1.0, 0.0), (0.5, 0.6), (0.2, 0.0)])
def test_range_checks(a, b):
    with pytest.raises(DomainError):
        rho_star(a, b)


def test_pen_examples():
    pen = rho_star_pen(0.2, 0.48).rho_star
    assert pen == pytest.approx(0.10807114874611861, rel=1e-13)
    assert pen > rho_star(0.2, 0.48).rho_star
    assert rho_star_pen(0.2, 0.65).rho_star == rho_star(0.2, 0.65).rho_star
    assert rho_star_pen(0.3, 0.25).rho_star == pytest.approx(-0.10, abs=1e-15)
    with pytest.raises(DomainError):
        rho_star_pen(0.2, 0.4)


def test_pen_dominates_on_grid():
    for alpha in np.linspace(0.0, 0.95, 50):
        for beta in np.linspace(0.01, 1.0, 50):
            if alpha + beta > 1:
                continue
            ratio = beta / (1 - alpha)
            if ratio == 0.5:
                continue
            pen, opt = rho_star_pen(alpha, beta).rho_star, rho_star(alpha, beta).rho_star
            assert pen >= opt - 1e-12
            strict = 0.5 < ratio < 0.75
            assert (pen > opt + 1e-12) == strict


def test_unstructured_hc():
    r = rho_star_unstructured_hc(0.2, 0.65)
    # beta below 3/4: the (beta - 1/2) branch applies
    assert r.rho_star == pytest.approx(0.15, abs=1e-15) and r.scaling_exponent == 0.2
    r = rho_star_unstructured_hc(0.1, 0.8)
    assert r.rho_star == pytest.approx((1 - math.sqrt(0.2)) ** 2) and r.scaling_exponent == 0.1
    for beta in (0.55, 0.7, 0.8, 0.95):
        assert rho_star_unstructured_hc(0.0, beta).rho_star == pytest.approx(rho_star(0.0, beta).rho_star)
    # below (1 - alpha)/2 both boundaries coincide
    for alpha, beta in ((0.3, 0.2), (0.1, 0.4)):
        assert rho_star_unstructured_hc(alpha, beta).rho_star == pytest.approx(rho_star(alpha, beta).rho_star)
        assert rho_star_unstructured_hc(alpha, beta).scaling_exponent == 0.0


# --- tail bounds ----------------------------------------------------------------------


def test_bj_bound_examples():
    # mpmath: 22*2*log(1000)*16*exp(-15) + 2/1000
    assert bj_tail_bound(15, 1000, 2) == pytest.approx(0.0034876212519867584, rel=1e-12)
    assert bj_tail_bound(200, 1000, 2) == pytest.approx(2 * 1000 ** -1, rel=1e-9)
    assert bj_tail_bound(0.1, 1000, 2) == 1.0
    with pytest.raises(DomainError):
        bj_tail_bound(5, 1000, 1.0)


def test_bb_and_loglik_examples():
    assert bb_sup_bound(3, 0.25, 0.75) == pytest.approx(0.032167864369174720, rel=1e-12)
    assert ks_loglik_bound(8, 0.25, 0.75) == pytest.approx(0.033881515392645718, rel=1e-12)
    assert ks_loglik_bound(8, 0.25, 0.75, n=10) == ks_loglik_bound(8, 0.25, 0.75, n=10 ** 6)
    assert bb_sup_bound(40, 0.25, 0.75) < 1e-300
    assert ks_loglik_bound(700, 0.25, 0.75) < 1e-290


@pytest.mark.parametrize("f", [bb_sup_bound, ks_loglik_bound])
def test_interval_checks(f):
    for a, b in ((0.5, 0.5), (0.0, 0.5), (0.4, 1.0), (0.7, 0.2)):
        with pytest.raises(DomainError):
            f(3.0, a, b)
    with pytest.raises(DomainError):
        f(0.0, 0.25, 0.75)
    with pytest.raises(DomainError):
        f(math.inf, 0.25, 0.75)


def test_bounds_monotone_and_clamped():
    etas = np.linspace(1.0, 40.0, 400)
    for vals in (
        [bj_tail_bound(e, 1000, 2) for e in etas],
        [bb_sup_bound(e, 0.1, 0.9) for e in etas],
        [ks_loglik_bound(e, 0.1, 0.9) for e in etas],
        [hc_tail_bound(e, 1000, 2.0) for e in etas[etas >= math.sqrt(3 * math.log(math.log(1000)))]],
    ):
        v = np.array(vals)
        assert np.all((v >= 0) & (v <= 1))
        assert np.all(np.diff(v) <= 1e-15)


def test_hc_bound_range():
    n = 1000
    lo = math.sqrt(3 * math.log(math.log(n)))
    assert hc_tail_bound(lo, n, 0.5) == pytest.approx(0.5 / lo)
    with pytest.raises(DomainError):
        hc_tail_bound(lo * 0.99, n, 0.5)
    with pytest.raises(DomainError):
        hc_tail_bound(5.0, n, 0.5, D=2.0)
    with pytest.raises(DomainError):
        hc_tail_bound(5.0, 8, 0.5)
