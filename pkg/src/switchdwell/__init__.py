"""Stability analysis of switched systems under dwell-time and average
dwell-time constraints."""
from . import bounds, certify, linalg, signals, sim
from .bounds import empirical_converse_norm, estimate_min_adt, tau_star
from .certify import (
    ComparisonFunction,
    NonlinearCertificate,
    QuadraticCertificate,
    check_adt_quadratic,
    check_dwell_quadratic,
    check_nonlinear_sampled,
    gamma_transform,
    psi_eps,
    search_dwell_quadratic,
)
from .linalg import SpdMatrix, eigvals_general, expm, gen_eig_max, lyap_solve, symmetric_eigs
from .signals import SignalClassSpec, SwitchingSignal, classify, concat, count_switches, sample_signal, shift
from .sim import DecayEnvelope, SwitchedSystem, check_envelope, fit_envelope, flow_linear, flow_nonlinear

__version__ = "0.1.0"
