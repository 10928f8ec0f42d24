"""Dirichlet problems for curvature equations of radial graphs in space forms.

Pointwise geometry and curvature operators for radial graphs over domains of
S^n in Euclidean space (K=0), the hemisphere (K=1) and hyperbolic space
(K=-1), plus a finite-difference solver (n = 2) driven by homotopy
continuation and damped Newton.
"""

from .curvature import CurvatureFunctionSpec, check_structure_conditions, eval_f, grad_f, parse_curvature
from .discretization import DiscreteField, build_domain, covariant_jet, covariant_jets
from .errors import (
    BoundaryStencilError,
    ConeViolationError,
    ContinuationError,
    DomainError,
    HemisphereError,
    NonConvergenceError,
    PreconditionError,
    StaleInputError,
    UnsupportedModelError,
)
from .geometry import ScalarJet2, frame_from_rho, frame_from_u, frame_from_v
from .operator import dG_t_dt, evaluate_G, evaluate_G_t, linearize_G
from .solver import DiscreteProblem, continuation_run, newton_solve, solve_pipeline, verify_subsolution
from .spaceform import DeformedModel, SpaceFormModel

__version__ = "0.1.0"
