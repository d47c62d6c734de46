"""Stationary annular patches of the generalized SQG equation.

Bifurcation radii of m-fold stationary patches off the annulus, numerical
checks of the spectral properties behind them, and Newton continuation of the
bifurcating branches on the full contour functional.
"""
__version__ = "0.1.0"

from .bifurcation import BifurcationPoint, find_b_star, scan_determinant
from .config import RunConfig
from .continuation import Branch, BranchPoint, ContinuationConfig, trace_branch
from .errors import (
    AccuracyError,
    DomainError,
    InconsistencyError,
    InvariantFailure,
    NonConvergence,
    PatchError,
    PreconditionError,
)
from .functional import FourierCosine, PatchState, eval_DF, eval_F
from .linops import delta, mode_matrix, transversality
from .specfun import Params, hyp2f1, lambda_n, theta_n

__all__ = [
    "__version__",
    "AccuracyError",
    "BifurcationPoint",
    "Branch",
    "BranchPoint",
    "ContinuationConfig",
    "DomainError",
    "FourierCosine",
    "InconsistencyError",
    "InvariantFailure",
    "NonConvergence",
    "Params",
    "PatchError",
    "PatchState",
    "PreconditionError",
    "RunConfig",
    "delta",
    "eval_DF",
    "eval_F",
    "find_b_star",
    "hyp2f1",
    "lambda_n",
    "mode_matrix",
    "scan_determinant",
    "theta_n",
    "trace_branch",
    "transversality",
]
