"""Numerical laboratory for the planar Neumann problem for Poisson's equation.

Solves lap u = f with du/dn = g on intervals and smooth star-shaped
planar domains, and empirically verifies the classical solvability and
a priori estimate theory: the compatibility condition, uniqueness up to
additive constants, the maximum-principle bound of the shifted problem,
energy/L2 estimates, local interior sup bounds, and the Holder-scale
(Schauder) estimate, including a constructive compact-operator
iteration route to the solution.
"""

__version__ = "0.1.0"

from .domain import DomainSpec, Mesh, boundary_normal, build_mesh, distance_to_boundary
from .errors import (BallNotContained, ConfigError, DegenerateData,
                     DegenerateInput, EvalDomainError, ExprSyntaxError,
                     IncompatibleData, InvalidExponent, LinearSolveFailure,
                     MeshMismatch, NeumannLabError, NonConvergence,
                     NonPositiveRadius, NonZeroMeanInput, ResolutionTooSmall,
                     UnknownIdentifier)
from .field import (BoundaryFunction, GridFunction, boundary_trace, gradient,
                    integrate_boundary, integrate_volume, laplacian, mean,
                    normal_derivative, subtract_mean)
from .norms import (HolderParams, HolderReport, c_k_alpha_norm, holder_seminorm,
                    l2_norm, pairwise_holder_max)
from .solver import (SolveReport, apply_screened_inverse, check_compatibility,
                     solve_1d_oracle, solve_bordered, solve_neumann,
                     solve_neumann_pinned, solve_regularized)
from .verify import (EstimateReport, ManufacturedCase, ProblemFamily,
                     VerifyConfig, convergence_study, energy_identity_defect,
                     incompatibility_probe, intermediate_ratio, l2_lemma_ratio,
                     run_family_study, schauder_ratio, serrin_local_ratio)

__all__ = [name for name in dir() if not name.startswith("_")]
