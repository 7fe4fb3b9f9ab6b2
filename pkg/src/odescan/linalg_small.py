"""Small dense matrix/vector arithmetic.

Matrices are 2-D float64 numpy arrays, vectors are 1-D float64 arrays; the
``Mat`` and ``Vec`` aliases below record that convention. Block sizes in this
package are tiny (state dimension at most a handful), so these routines
favour strict validation and precise failure reporting over throughput. The
LU solve shares its factorization code with the compiled solver kernels, so
library-level and kernel-level solves produce identical results.
"""

import numpy as np

from . import _kernels

Mat = np.ndarray
Vec = np.ndarray

__all__ = [
    "Mat",
    "Vec",
    "SingularMatrixError",
    "mat_mul",
    "mat_vec",
    "lu_solve",
    "inf_norm",
]


class SingularMatrixError(Exception):
    """Raised when an LU pivot is smaller than the working-precision floor.

    The offending pivot (column) index is available as ``pivot_index``.
    """

    def __init__(self, pivot_index: int):
        self.pivot_index = int(pivot_index)
        super().__init__(
            f"matrix is singular to working precision (pivot {pivot_index})"
        )


def _as_matrix(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] == 0 or a.shape[1] == 0:
        raise ValueError(f"{name} must be a nonempty 2-D array, got shape {a.shape}")
    return a


def _as_vector(v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] == 0:
        raise ValueError(f"{name} must be a nonempty 1-D array, got shape {v.shape}")
    return v


def mat_mul(a: Mat, b: Mat) -> Mat:
    """Matrix product a @ b with dimension validation."""
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(
            f"inner dimensions differ: a is {a.shape}, b is {b.shape}"
        )
    return a @ b


def mat_vec(a: Mat, v: Vec) -> Vec:
    """Matrix-vector product a @ v with dimension validation."""
    a = _as_matrix(a, "a")
    v = _as_vector(v, "v")
    if a.shape[1] != v.shape[0]:
        raise ValueError(
            f"inner dimensions differ: a is {a.shape}, v has dim {v.shape[0]}"
        )
    return a @ v


def lu_solve(a: Mat, b):
    """Solve a @ x = b by LU with partial pivoting.

    b may be a vector or a matrix of stacked right-hand-side columns; the
    result has b's shape. Raises SingularMatrixError when a pivot magnitude
    drops below 1e-300, which flags genuine breakdown without tripping on
    stiff-scaled blocks.
    """
    a = _as_matrix(a, "a")
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"coefficient matrix must be square, got {a.shape}")
    b_arr = np.asarray(b, dtype=np.float64)
    if b_arr.ndim not in (1, 2):
        raise ValueError("right-hand side must be 1-D or 2-D")
    if b_arr.shape[0] != a.shape[0]:
        raise ValueError(
            f"right-hand side has {b_arr.shape[0]} rows, expected {a.shape[0]}"
        )
    lu = a.copy()
    piv = np.empty(a.shape[0], dtype=np.int64)
    status = _kernels.lu_factor_inplace(lu, piv)
    if status >= 0:
        raise SingularMatrixError(status)
    if b_arr.ndim == 1:
        x = b_arr.copy()
        _kernels.lu_solve_inplace(lu, piv, x)
        return x
    x = np.empty_like(b_arr)
    for j in range(b_arr.shape[1]):
        col = b_arr[:, j].copy()
        _kernels.lu_solve_inplace(lu, piv, col)
        x[:, j] = col
    return x


def inf_norm(v) -> float:
    """Maximum absolute entry. Accepts any nonempty array and flattens it."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("inf_norm of an empty array is undefined")
    return float(np.max(np.abs(arr)))
