"""reglab: a numerical laboratory for weighted gradient estimates of double-obstacle problems."""

from .fields import ScalarField, VectorField
from .geometry import Ball, Domain, Grid, build_grid, cells_in_ball, make_domain, measure_flatness
from .norms import (LorentzParams, YoungFunction, estimate_fund_constant, lorentz_norm,
                    luxemburg_norm, weighted_lq)
from .operators import (distribution, frac_maximal, localization_check, riesz_at,
                        riesz_potential, weak_type_check)
from .solver import (ProblemSpec, Solution, SolverConfig, assemble, kkt_residual,
                     solve_dirichlet, solve_double_obstacle, solve_frozen, solve_one_obstacle)
from .weights import (CoefficientField, Weight, coefficient_field, constant_weight,
                      estimate_Ainf, estimate_Ap, partial_bmo_seminorm, power_weight,
                      weighted_measure)

__version__ = "0.1.0"

__all__ = [
    "ScalarField", "VectorField", "Ball", "Domain", "Grid", "build_grid", "cells_in_ball",
    "make_domain", "measure_flatness", "LorentzParams", "YoungFunction",
    "estimate_fund_constant", "lorentz_norm", "luxemburg_norm", "weighted_lq", "distribution",
    "frac_maximal", "localization_check", "riesz_at", "riesz_potential", "weak_type_check",
    "ProblemSpec", "Solution", "SolverConfig", "assemble", "kkt_residual", "solve_dirichlet",
    "solve_double_obstacle", "solve_frozen", "solve_one_obstacle", "CoefficientField", "Weight",
    "coefficient_field", "constant_weight", "estimate_Ainf", "estimate_Ap",
    "partial_bmo_seminorm", "power_weight", "weighted_measure",
]
