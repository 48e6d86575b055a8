"""Stress concentration in 2D Stokes flow between two nearly touching rigid inclusions."""
from .geometry import NeckGeometry, Region, GeometryError, OutOfNeckError, delta, classify_point
from .singular_fields import FieldId, FieldEval, ALL_IDS, aux_field, keller, divergence, residual, bound_ratio
from .mesh import Mesh, build_mesh, audit_mesh, ConfigurationError
from .stokes import (BoundaryData, Discretization, MixedField, SolverError, IncompatibleDataError,
                     discretize, solve_dirichlet, evaluate, stress, energy_inner_product)
from .rigid import (LinearDatum, InteractionSystem, AssembledSolution, solve_subproblems,
                    build_interaction, solve_constants, solve_system, balance_residuals, b_tilde,
                    blow_up_functional)
from .analysis import (fit_rate, gradient_envelope_check, remainder_check, lower_bound_check,
                       second_derivative_rate, interaction_scaling_check, evaluate_sweep, SweepReport)

__version__ = "0.1.0"
