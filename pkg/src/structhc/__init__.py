"""Structured higher criticism, Berk-Jones and divergence statistics for block-sparse signals."""
from .errors import ConfigurationError, DomainError, ResourceGuardError
from .gauss import region_pvalue, upper_tail, upper_tail_inv
from .gof import bj, hc, hc_plus, phi_divergence
from .models import Dataset, SignalConfig, boundary_gap, calibrated_mu, generate
from .regions import (
    ApproxLevel,
    Ball,
    Interval,
    Rectangle,
    approximate_region,
    ball_symdiff_bound,
    build_ball_levels,
    build_interval_levels,
    build_rectangle_levels,
)
from .structured import StatValue, penalized_scan, structured_stat
from .theory import (
    BoundaryResult,
    bb_sup_bound,
    bj_tail_bound,
    hc_tail_bound,
    ks_loglik_bound,
    rho_star,
    rho_star_pen,
    rho_star_unstructured_hc,
)

__version__ = "0.1.0"
