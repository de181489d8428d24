"""Gradient sliding solvers with separated oracle complexities for ``f + g``.

``f`` may be nonsmooth, weakly smooth or smooth; ``g`` is smooth. The solvers
charge every oracle call to an :class:`OracleTally`, so the number of ``f``
and ``g`` gradients can be compared directly.
"""

from .core import (CompositeProblem, ConfigurationError, DomainError, GradslideError, OracleError,
                   OracleTally, ProblemMetadata, RunawayError, RunReport, SolverConfig, evaluate_f,
                   evaluate_g, holder_smoothing_bound)
from .gds import gds_subroutine, solve_gds_known
from .kernels import HAVE_COMPILED, NativeF, get_backend, set_backend, use_backend
from .pfgds import adaptive_sliding_subroutine, solve_pfgds, solve_pfgds_naive
from .problems import (InstanceSpec, build_instance, certify_constants, make_quad_l1, make_quad_power,
                       make_quad_quad, make_simplex_entropy_linear)
from .prox import (ProxSetup, ball, box, bregman, composite_prox, entropy_simplex, euclidean,
                   euclidean_simplex, project_simplex, three_point_check)
from .recursion import StepCoefficientState, forced_weight, next_coefficient, termination_root_squared
from .ugs import OuterAccelState, solve_pfugs, solve_ugs, ugs_inner

__version__ = "0.1.0"
