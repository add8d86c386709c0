"""Certified bounds for the Lyapunov exponent of restricted switching systems.

Submodules
----------
numlin
    Matrix exponential, spectra, irreducibility.
lpcore
    Polytope norms by linear programming.
sysmodel
    Systems, switching laws, simulation, JSON formats.
engine
    Invariant multi-polytope construction and bisection for the exponent.
cuttail
    Cut-tail points and simplification of switching bounds.
oracle
    Brute-force lower bounds and random growth probes.
cli
    Command-line front end.
"""
from .engine import (
    EngineConfig,
    AlgorithmReport,
    SigmaInterval,
    bisect_sigma,
    check_lyapunov_multinorm,
    run_algorithm1,
)
from .cuttail import find_t_cut, is_cut_tail, simplify_bounds
from .oracle import best_periodic_lower_bound, growth_probe
from .sysmodel import (
    FiniteSwitchingLaw,
    RestrictedSystem,
    law_lower_bound,
    load_system,
    simulate,
)

__version__ = "0.1.0"

__all__ = [
    "EngineConfig",
    "AlgorithmReport",
    "SigmaInterval",
    "bisect_sigma",
    "check_lyapunov_multinorm",
    "run_algorithm1",
    "find_t_cut",
    "is_cut_tail",
    "simplify_bounds",
    "best_periodic_lower_bound",
    "growth_probe",
    "FiniteSwitchingLaw",
    "RestrictedSystem",
    "law_lower_bound",
    "load_system",
    "simulate",
]
