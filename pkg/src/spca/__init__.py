"""Spherical PCA.

Factorizes a data matrix ``X`` (m x n, columns are observations) as ``U @ V``
with orthonormal ``U`` (m x r) and unit-norm columns of ``V`` (r x n), so that
Euclidean distance between components is a monotone function of their angle.
"""

from spca.errors import (
    DataFormatError,
    DegenerateColumnError,
    DimensionError,
    NumericalError,
    RankError,
    SpcaError,
)
from spca.model import DataMatrix, lipschitz_constant, objective
from spca.solver import FitResult, IterateRecord, SolverConfig, estimate_rate, fit

__version__ = "0.1.0"

__all__ = [
    "DataFormatError",
    "DataMatrix",
    "DegenerateColumnError",
    "DimensionError",
    "FitResult",
    "IterateRecord",
    "NumericalError",
    "RankError",
    "SolverConfig",
    "SpcaError",
    "estimate_rate",
    "fit",
    "lipschitz_constant",
    "objective",
]
