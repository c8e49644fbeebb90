"""Numerical laboratory for expanding affine gas balls with vacuum boundaries."""

from .background import (AffineMotion, BackgroundProfile, GammaExponents,
                         build_profile, eulerian_fields, gamma_exponents,
                         integrate_affine)
from .calculus import (GridFunction, RadialGrid, VectorFieldWord, apply_Dbar_i,
                       apply_Di, apply_Dr, apply_Lk, apply_Lk_star, apply_dr,
                       compute_Qminus, compute_Qplus, cutoff_psi, enumerate_P,
                       weighted_norm)
from .diagnostics import (EnergyReport, check_coercivity,
                          check_norm_energy_equivalence,
                          compute_energy_identity_terms, compute_SN,
                          control_ratio, embedding_survey,
                          energy_identity_residual, fit_decay)
from .oracle import (ChiState, ChiTrajectory, compare_solutions,
                     initial_chi_from_H, solve_chi)
from .solver import (LwpResult, SolveControls, cfl_dtau, initial_data,
                     lwp_iterate, manufactured_solution, rhs_H, solve, step)
from .state import (AprioriMonitor, PerturbationState, Trajectory,
                    compute_remainders, make_state)

__version__ = "0.1.0"

__all__ = [
    "AffineMotion", "AprioriMonitor", "BackgroundProfile", "ChiState",
    "ChiTrajectory", "EnergyReport", "GammaExponents", "GridFunction",
    "LwpResult", "PerturbationState", "RadialGrid", "SolveControls",
    "Trajectory", "VectorFieldWord", "apply_Dbar_i", "apply_Di", "apply_Dr",
    "apply_Lk", "apply_Lk_star", "apply_dr", "build_profile", "cfl_dtau",
    "check_coercivity", "check_norm_energy_equivalence", "compare_solutions",
    "compute_energy_identity_terms", "compute_Qminus", "compute_Qplus",
    "compute_SN", "compute_remainders", "control_ratio", "cutoff_psi",
    "embedding_survey", "energy_identity_residual", "enumerate_P",
    "eulerian_fields", "fit_decay", "gamma_exponents", "initial_chi_from_H",
    "initial_data", "integrate_affine", "lwp_iterate",
    "manufactured_solution", "make_state", "rhs_H", "solve", "solve_chi",
    "step", "weighted_norm",
]
