"""Hermite-type sampling Kantorovich operators built on cardinal B-spline kernels."""

from .analysis import (ErrorReport, ModulusEstimator, NonConstantMomentsError, bound_thm2ii,
                       bound_thm2iii, bound_thm5, convergence_sweep, modulus_of_continuity,
                       sup_error, voronovskaja_constant, voronovskaja_constant_derivative,
                       well_definedness_bound)
from .expr import Field, parse
from .grids import GridSpec, Surface
from .kernels import Kernel, algebraic_moment, absolute_moment, moment_table, verify_kernel_conditions
from .operator import (Cell, OperatorParams, QuadratureRule, active_indices, cell_integral,
                       evaluate_on_grid, evaluate_operator)
from .simultaneous import (DerivativeRequest, evaluate_derivative_operator,
                           finite_difference_operator_derivative)

__all__ = [
    "Cell", "DerivativeRequest", "ErrorReport", "Field", "GridSpec", "Kernel", "ModulusEstimator",
    "NonConstantMomentsError", "OperatorParams", "QuadratureRule", "Surface", "absolute_moment",
    "active_indices", "algebraic_moment", "bound_thm2ii", "bound_thm2iii", "bound_thm5",
    "cell_integral", "convergence_sweep", "evaluate_derivative_operator", "evaluate_on_grid",
    "evaluate_operator", "finite_difference_operator_derivative", "modulus_of_continuity",
    "moment_table", "parse", "sup_error", "verify_kernel_conditions", "voronovskaja_constant",
    "voronovskaja_constant_derivative", "well_definedness_bound",
]
