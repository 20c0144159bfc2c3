"""Problem data, feasible sets, objective, gradients and the Lipschitz bound.

Feasible pairs satisfy ``U.T @ U == I`` (orthonormal directions) and
``||V[:, j]|| == 1`` for every column (components on the unit sphere). On
unit-norm components ``||v_i - v_j||**2 == 2 - 2 cos(angle)``, which is why
Euclidean clustering of ``V`` is clustering by angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from spca.errors import DegenerateColumnError, DimensionError, RankError
from spca.numkit import as_matrix, fro_norm

# Feasibility tolerances checked after every solver iteration.
ORTH_TOL = 1e-10
COLNORM_TOL = 1e-12
# Column-norm band for data flagged as normalized.
NORMALIZED_TOL = 1e-10


@dataclass(frozen=True)
class DataMatrix:
    """Observations stored column-wise in an m x n matrix."""

    x: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        x = as_matrix(self.x, "data")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        if self.normalized:
            norms = np.linalg.norm(x, axis=0)
            bad = np.flatnonzero(np.abs(norms - 1.0) > NORMALIZED_TOL)
            if bad.size:
                raise ValueError(
                    f"data flagged normalized but column {bad[0]} has norm {norms[bad[0]]!r}"
                )

    @property
    def shape(self) -> tuple[int, int]:
        return self.x.shape

    @property
    def m(self) -> int:
        return self.x.shape[0]

    @property
    def n(self) -> int:
        return self.x.shape[1]


class LipschitzBound(NamedTuple):
    l_c: float


class Feasibility(NamedTuple):
    orth_residual: float
    worst_column_norm_error: float

    def ok(self) -> bool:
        return self.orth_residual <= ORTH_TOL and self.worst_column_norm_error <= COLNORM_TOL


def _data(x) -> np.ndarray:
    return x.x if isinstance(x, DataMatrix) else as_matrix(x, "data")


def _check_shapes(x: np.ndarray, u: np.ndarray, v: np.ndarray) -> None:
    m, n = x.shape
    if u.ndim != 2 or v.ndim != 2:
        raise DimensionError("factors must be 2-D")
    r = u.shape[1]
    if u.shape[0] != m or v.shape != (r, n):
        raise DimensionError(
            f"shapes disagree: X {x.shape}, U {u.shape}, V {v.shape} (need m x r and r x n)"
        )


def objective(x, u, v) -> float:
    """Squared Frobenius residual ``||X - U V||_F**2``."""
    x = _data(x)
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    _check_shapes(x, u, v)
    resid = x - u @ v
    return float(np.vdot(resid, resid))


def grad_u(x, u, v) -> np.ndarray:
    """Partial gradient in U: ``-2 (X - U V) V^T``."""
    x = _data(x)
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    _check_shapes(x, u, v)
    return -2.0 * (x - u @ v) @ v.T


def grad_v(x, u, v) -> np.ndarray:
    """All column gradients at once: column j is ``grad_vj(x, u, v, j)``."""
    x = _data(x)
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    _check_shapes(x, u, v)
    return -2.0 * u.T @ (x - u @ v)


def grad_vj(x, u, v, j: int) -> np.ndarray:
    """Gradient in column j of V.

    Uses the general form ``-2 U^T (x_j - U v_j)``, which stays exact when
    ``U`` is only approximately orthonormal.
    """
    x = _data(x)
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    _check_shapes(x, u, v)
    n = x.shape[1]
    if not 0 <= j < n:
        raise IndexError(f"column index {j} out of range for n={n}")
    return -2.0 * u.T @ (x[:, j] - u @ v[:, j])


def lipschitz_constant(x, r: int) -> LipschitzBound:
    """Gradient Lipschitz bound of the objective over feasible pairs.

    With ``||U||_F**2 = r`` and ``||V||_F**2 = n`` on the feasible set the
    bound is ``2 (r + n + sqrt(r n) + ||X||_F)``.
    """
    x = _data(x)
    m, n = x.shape
    if not isinstance(r, (int, np.integer)) or not 1 <= r <= min(m, n):
        raise RankError(f"rank must be an integer in [1, {min(m, n)}], got {r!r}")
    return LipschitzBound(2.0 * (r + n + math.sqrt(r * n) + fro_norm(x)))


def unit_columns(a: np.ndarray) -> np.ndarray:
    """Divide every column by its l2 norm; zero columns raise."""
    a = as_matrix(a)
    scale = np.max(np.abs(a), axis=0)
    zero = np.flatnonzero(scale == 0.0)
    if zero.size:
        raise DegenerateColumnError(int(zero[0]))
    out = a / scale
    out /= np.linalg.norm(out, axis=0)
    # a second pass pulls norms from ~1 ulp off down to exact rounding of 1
    return out / np.linalg.norm(out, axis=0)


def project_to_sphere_columns(v) -> np.ndarray:
    return unit_columns(v)


def feasibility_report(u, v) -> Feasibility:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    r = u.shape[1]
    orth = float(np.linalg.norm(u.T @ u - np.eye(r)))
    worst = float(np.max(np.abs(np.linalg.norm(v, axis=0) - 1.0)))
    return Feasibility(orth, worst)
