"""Exception hierarchy shared by the library and the CLI (which maps them to exit codes)."""


class SLPotentialError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SLPotentialError, ValueError):
    pass


class DomainError(SLPotentialError, ValueError):
    """Argument outside the domain of an operator (e.g. a non-convex Hessian)."""


class ConfigError(SLPotentialError, ValueError):
    pass


class GeometryError(SLPotentialError):
    pass


class DegenerateBoundaryError(GeometryError):
    pass


class SingularityError(SLPotentialError):
    pass


class ConvexityLostError(SLPotentialError):
    def __init__(self, message, min_eigenvalue=None, node=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue
        self.node = node


class ConvergenceError(SLPotentialError):
    """Continuation could not reach t = 1; carries the partial trace."""

    def __init__(self, message, trace=None, state=None, kind=None):
        super().__init__(message)
        self.trace = trace or []
        self.state = state
        self.kind = kind


class OracleError(SLPotentialError):
    pass
