"""Dense linear-algebra kernels.

Matrices and vectors are plain float64 numpy arrays. The helpers
:func:`as_matrix` and :func:`as_vector` enforce the construction invariants
(correct dimensionality, finite entries) at the package boundary.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from .errors import NonFiniteInput, NotPowerOfTwo, RankDeficient, ShapeMismatch

EPS = np.finfo(np.float64).eps


def as_matrix(A, name: str = "A") -> np.ndarray:
    M = np.ascontiguousarray(A, dtype=np.float64)
    if M.ndim != 2:
        raise ShapeMismatch(f"{name} must be 2-dimensional, got shape {M.shape}")
    if not np.isfinite(M).all():
        raise NonFiniteInput(f"{name} contains NaN or Inf")
    return M


def as_vector(v, length: int | None = None, name: str = "b") -> np.ndarray:
    x = np.ascontiguousarray(v, dtype=np.float64)
    if x.ndim == 2 and 1 in x.shape:
        x = x.reshape(-1)
    if x.ndim != 1:
        raise ShapeMismatch(f"{name} must be 1-dimensional, got shape {x.shape}")
    if length is not None and x.shape[0] != length:
        raise ShapeMismatch(f"{name} has length {x.shape[0]}, expected {length}")
    if not np.isfinite(x).all():
        raise NonFiniteInput(f"{name} contains NaN or Inf")
    return x


def _check_rank(R: np.ndarray, rows: int, cols: int) -> None:
    diag = np.abs(np.diag(R))
    k = diag.shape[0]
    top = diag.max() if k else 0.0
    if top == 0.0:
        raise RankDeficient(0, k)
    tol = max(rows, cols) * EPS * top
    rank = int(np.count_nonzero(diag >= tol))
    if rank < k:
        raise RankDeficient(rank, k)


def _qr(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # LAPACK geqrf/orgqr: Householder reflections, reduced form.
    Q, R = np.linalg.qr(M, mode="reduced")
    _check_rank(R, *M.shape)
    return Q, R


def lstsq_solve(A, b) -> np.ndarray:
    """Least-squares solution ``argmin_x ||Ax - b||^2`` via Householder QR.

    Raises :class:`RankDeficient` when ``A`` does not have full column rank
    to the tolerance ``max(rows, cols) * eps * max|R_jj|``.
    """
    A = as_matrix(A)
    n, d = A.shape
    b = as_vector(b, n)
    if n < d:
        raise ShapeMismatch(f"lstsq_solve needs rows >= cols, got {n}x{d}")
    Q, R = _qr(A)
    return solve_triangular(R, Q.T @ b, check_finite=False)


def minnorm_solve(A, b) -> np.ndarray:
    """Minimum-norm solution of the underdetermined system ``Ax = b``.

    Factors ``A^T = QR`` so that ``x = Q R^{-T} b`` lies in the row space of A.
    """
    A = as_matrix(A)
    n, d = A.shape
    b = as_vector(b, n)
    if n > d:
        raise ShapeMismatch(f"minnorm_solve needs rows <= cols, got {n}x{d}")
    Q, R = _qr(A.T)
    y = solve_triangular(R, b, trans="T", check_finite=False)
    return Q @ y


def fwht(v) -> np.ndarray:
    """Unnormalized fast Walsh-Hadamard transform along axis 0 (Sylvester order).

    Accepts a vector or a matrix (each column is transformed). Runs in
    O(n log n) per column and returns a new array.
    """
    x = np.array(v, dtype=np.float64, copy=True)
    n = x.shape[0] if x.ndim else 0
    if n == 0 or n & (n - 1):
        raise NotPowerOfTwo(n)
    tail = x.shape[1:]
    h = 1
    while h < n:
        y = x.reshape((n // (2 * h), 2, h) + tail)
        top = y[:, 0] + y[:, 1]
        y[:, 1] = y[:, 0] - y[:, 1]
        y[:, 0] = top
        h *= 2
    return x


def leverage_scores(A) -> np.ndarray:
    """Row leverage scores: squared row norms of the thin-QR factor ``Q``."""
    A = as_matrix(A)
    n, d = A.shape
    if n < d:
        raise ShapeMismatch(f"leverage_scores needs rows >= cols, got {n}x{d}")
    Q, _ = _qr(A)
    return np.einsum("ij,ij->i", Q, Q)


def residual_cost(A, x, b) -> float:
    """Exact squared residual ``||Ax - b||^2``."""
    A = as_matrix(A)
    n, d = A.shape
    x = as_vector(x, d, name="x")
    b = as_vector(b, n)
    r = A @ x - b
    return float(r @ r)
