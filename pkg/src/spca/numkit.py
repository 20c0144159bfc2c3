"""Dense real-matrix kernels.

Matrices are plain 2-D ``float64`` numpy arrays. The functions here validate
shape and finiteness at the boundary and otherwise defer to LAPACK.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from spca.errors import DimensionError, NumericalError, RankError

# Relative threshold on |R_ii| / max|R_jj| below which a QR factor is rank deficient.
RANK_TOL = 1e-12


class ThinSvd(NamedTuple):
    """``a == left @ np.diag(singulars) @ right.T`` with k = min(m, n)."""

    left: np.ndarray
    singulars: np.ndarray
    right: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left * self.singulars) @ self.right.T


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite 2-D float64 array with at least one row and column."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must have at least one row and column, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        i, j = np.argwhere(~np.isfinite(arr))[0]
        raise NumericalError(f"{name} has non-finite entry at ({i}, {j})")
    return arr


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def thin_svd(a) -> ThinSvd:
    """Thin SVD with singular values in nonincreasing order."""
    a = as_matrix(a)
    try:
        left, s, right_t = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        # LAPACK gesdd does not expose its sweep count
        raise NumericalError(f"SVD did not converge for {a.shape} input: {exc}") from exc
    return ThinSvd(left, s, right_t.T)


def orthonormalize(a) -> np.ndarray:
    """Orthonormal basis for the column space of a full-column-rank matrix."""
    a = as_matrix(a)
    m, r = a.shape
    if m < r:
        raise RankError(f"cannot orthonormalize {r} columns in dimension {m}")
    q, rfac = np.linalg.qr(a)
    diag = np.abs(np.diag(rfac))
    if diag.max() == 0.0 or diag.min() <= RANK_TOL * diag.max():
        raise RankError(f"input of shape {a.shape} is rank deficient")
    return q


def fro_norm(a) -> float:
    a = np.asarray(a, dtype=np.float64)
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    if scale == 0.0 or not np.isfinite(scale):
        return scale
    # pre-scaling keeps entries near 1e200 from overflowing the sum of squares
    return scale * float(np.linalg.norm(a / scale))
