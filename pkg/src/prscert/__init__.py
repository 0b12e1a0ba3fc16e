"""Probabilistic small-signal stability certificates for boxes of operating points.

A Gaussian-process model of the critical eigenvalue, sampled by GP-UCB, gives
an upper confidence bound over the box; the box is certified when that bound
stays negative everywhere.
"""

from .box import SubspaceBox, load_box, save_box
from .certify import (Certificate, SearchFailure, ValidationReport, certify_prs, confidence_search,
                      subspace_search, validate_certificate)
from .gp import GPModel, KernelParams
from .ucb import BetaSchedule, UcbConfig, UcbHistory, beta, run_ucb_loop

__all__ = [
    "BetaSchedule", "Certificate", "GPModel", "KernelParams", "SearchFailure", "SubspaceBox",
    "UcbConfig", "UcbHistory", "ValidationReport", "beta", "certify_prs", "confidence_search",
    "load_box", "run_ucb_loop", "save_box", "subspace_search", "validate_certificate",
]
