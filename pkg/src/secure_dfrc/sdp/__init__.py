"""Dense block SDP modelling and an interior-point solver."""
from .problem import (
    Constraint,
    HermitianConstraint,
    SdpProblem,
    VarView,
    complexify,
    dump_problem,
    is_hermitian,
    load_problem,
    realify,
    realify_matrix,
)
from .solver import Infeasible, SdpError, SdpSolution, SlowProgress, Status, solve
from .verify import VerifyReport, verify

__all__ = [
    "Constraint", "HermitianConstraint", "SdpProblem", "VarView", "complexify",
    "dump_problem", "is_hermitian", "load_problem", "realify", "realify_matrix",
    "Infeasible", "SdpError", "SdpSolution", "SlowProgress", "Status", "solve",
    "VerifyReport", "verify",
]
