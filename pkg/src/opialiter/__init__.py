"""Fixed-point iteration engines with asymptotic convergence diagnostics."""

from ._kernels import BACKEND
from .diagnostics import (
    ar_check,
    ar_profile,
    fejer_monitor,
    flat_check,
    lambda_membership,
    opial_probe,
    psi_estimate,
    residual_profile,
    sharp_check,
    tail_bounds,
)
from .domains import ConvexDomain, ball, box, make_domain, simplex, sparse_ball
from .engines import EpsSchedule, Trace, mann_run, picard_run, read_trace, regularized_solve, write_trace
from .errors import (
    DimensionMismatchError,
    DomainEscapeError,
    InsufficientDataError,
    NonConvergenceError,
    NotInLambdaError,
    OpialiterError,
    UnknownCaseError,
    ValidationError,
)
from .operators import EpsilonBand, Operator, evaluate, local_nonexpansiveness_probe, make_operator, relaxed
from .space import Point, basis, combine, distance, inner_product, norm, zero
from .verdict import Status, TailWindow, Verdict

__version__ = "0.1.0"
