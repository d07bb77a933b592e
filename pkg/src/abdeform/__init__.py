"""Numerical study of the AB system and its non-holonomic and quasi-integrable deformations."""

__version__ = "0.1.0"

from .errors import (AbDeformError, AlgebraError, DimensionError, DomainError, ParameterError,
                     SolverError)
from .numerics import ComplexField, Grid

__all__ = ["AbDeformError", "AlgebraError", "ComplexField", "DimensionError", "DomainError",
           "Grid", "ParameterError", "SolverError", "__version__"]
