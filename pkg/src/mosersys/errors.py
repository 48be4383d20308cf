"""Exception hierarchy shared by all solvers."""


class MoserSysError(Exception):
    """Base class for every error raised by the package."""


class DomainEmptyError(MoserSysError):
    pass


class GridMismatchError(MoserSysError):
    pass


class ParameterError(MoserSysError, ValueError):
    """Invalid model parameters or violated theorem hypotheses."""


class NonlinOverflowError(MoserSysError, OverflowError):
    """An exponent argument exceeded the overflow cap."""

    def __init__(self, value, cap):
        super().__init__(f"exponent argument {value:.6g} exceeds cap {cap:g}")
        self.value = value
        self.cap = cap


class SolverError(MoserSysError):
    """An iterative solver failed; ``residual`` carries the last residual."""

    def __init__(self, message, residual=None, diagnostics=None):
        super().__init__(message)
        self.residual = residual
        self.diagnostics = diagnostics or {}


class ConvergenceError(SolverError):
    pass


class ProjectionError(SolverError):
    pass


class SemitrivialCollapseError(SolverError):
    """One component of a vector solution collapsed towards zero."""


class RegimeError(SolverError):
    """The iterate left the region where the chosen method is valid."""


class DegenerateOverlapError(MoserSysError):
    pass
