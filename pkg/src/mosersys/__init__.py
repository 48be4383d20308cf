"""Ground states of two-component elliptic systems with exponential coupling."""

from .constants import ThresholdReport, beta_thresholds, c_gamma, threshold_report
from .errors import (
    ConvergenceError,
    DegenerateOverlapError,
    DomainEmptyError,
    GridMismatchError,
    MoserSysError,
    NonlinOverflowError,
    ParameterError,
    ProjectionError,
    RegimeError,
    SemitrivialCollapseError,
    SolverError,
)
from .grid import Grid, build_domain, principal_eigenpair
from .nonlin import ModelParams
from .options import SolverOptions
from .scalar import GroundState, solve_scalar_ground_state
from .system import (
    FiberCoords,
    SystemSolution,
    solve_large_beta,
    solve_negative_beta,
    solve_small_beta,
)

__version__ = "0.1.0"
