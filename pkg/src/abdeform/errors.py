"""Exception types shared across the package."""


class AbDeformError(Exception):
    """Base class for all package errors."""


class DimensionError(AbDeformError):
    """Grid too small for the requested stencil or operation."""


class ParameterError(AbDeformError, ValueError):
    """Invalid physical or numerical parameter."""


class AlgebraError(AbDeformError):
    """Inconsistent loop-algebra operands (kappa mismatch, bad grades)."""


class DomainError(AbDeformError, ValueError):
    """Field values outside the domain of a nonlinear map."""


class SolverError(AbDeformError, RuntimeError):
    """Time integration diverged or produced non-finite values."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
