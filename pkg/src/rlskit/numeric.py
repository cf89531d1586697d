"""Dense matrix kernels shared by the solvers.

Matrices are plain ``numpy.ndarray`` objects of dtype float64 in row-major
(C) order.  Eigendecompositions and Cholesky factorizations go through
LAPACK via scipy.
"""
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.linalg import blas, lapack

from .errors import NotPositiveDefiniteError, NumericError, ShapeError

SYMMETRY_TOL = 1e-10


def as_mat(a, name="matrix"):
    """Return ``a`` as a C-contiguous 2-D float64 array (no copy if already one)."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {a.shape}")
    return np.ascontiguousarray(a)


@dataclass(frozen=True)
class EigPair:
    """Eigenvectors ``Q`` (columns) and eigenvalues sorted descending."""
    Q: np.ndarray
    lambdas: np.ndarray

    def reconstruct(self):
        return (self.Q * self.lambdas) @ self.Q.T


def matmul(a, b):
    a = as_mat(a, "a")
    b = as_mat(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def gram(x):
    """XᵀX via a single symmetric rank-k update (upper triangle mirrored)."""
    x = as_mat(x, "x")
    d = x.shape[1]
    acc = np.zeros((d, d), order="F")
    syrk_accumulate(acc, x)
    return symmetrize_upper(acc)


def cross(x, y):
    """Xᵀ·Y computed one output column at a time.

    Column t of the result depends only on column t of ``y``, so fitting
    outputs separately reproduces the joint result bit for bit.
    """
    x = as_mat(x, "x")
    y = as_mat(y, "y")
    if x.shape[0] != y.shape[0]:
        raise ShapeError(f"row mismatch: {x.shape[0]} vs {y.shape[0]}")
    out = np.empty((x.shape[1], y.shape[1]))
    for t in range(y.shape[1]):
        out[:, t] = x.T @ np.ascontiguousarray(y[:, t])
    return out


def syrk_accumulate(acc, block):
    """acc += blockᵀ·block in place, upper triangle only.

    ``acc`` must be a Fortran-ordered float64 square array; ``block`` a
    C-ordered row block (its transpose is then Fortran-ordered, so BLAS
    reads it without a copy).
    """
    if block.shape[0] == 0:
        return acc
    out = blas.dsyrk(1.0, block.T, beta=1.0, c=acc, trans=0, lower=0,
                     overwrite_c=1)
    if out is not acc and not np.shares_memory(out, acc):
        acc[...] = out
    return acc


def gemm_tn_accumulate(acc, a_block, b_block):
    """acc += a_blockᵀ·b_block in place (``acc`` Fortran-ordered)."""
    if a_block.shape[0] == 0:
        return acc
    out = blas.dgemm(1.0, a_block.T, b_block.T, beta=1.0, c=acc,
                     trans_a=0, trans_b=1, overwrite_c=1)
    if out is not acc and not np.shares_memory(out, acc):
        acc[...] = out
    return acc


def symmetrize_upper(c):
    # row-by-row copy keeps the extra allocation to one row
    d = c.shape[0]
    for i in range(d - 1):
        c[i + 1:, i] = c[i, i + 1:]
    return np.ascontiguousarray(c)


def _check_symmetric(a):
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if a.size and np.max(np.abs(a - a.T)) > SYMMETRY_TOL * scale:
        raise ShapeError("matrix is not symmetric")


def sym_eig(a):
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    Equal eigenvalues keep the order LAPACK returned them in (stable sort),
    so the same input always yields the same ``Q``.
    """
    a = as_mat(a, "a")
    _check_symmetric(a)
    try:
        w, q = linalg.eigh(a, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericError(f"eigendecomposition failed: {exc}") from exc
    order = np.argsort(-w, kind="stable")
    return EigPair(Q=np.ascontiguousarray(q[:, order]), lambdas=w[order])


def shifted_solve(a, b, shift):
    """Solve (a + shift·I)·Z = b by Cholesky factorization."""
    a = as_mat(a, "a")
    b = as_mat(b, "b")
    n = a.shape[0]
    if a.shape != (n, n):
        raise ShapeError(f"expected a square matrix, got {a.shape}")
    if b.shape[0] != n:
        raise ShapeError(f"right-hand side has {b.shape[0]} rows, expected {n}")
    if not np.isfinite(shift) or shift < 0:
        raise NumericError(f"shift must be finite and >= 0, got {shift}")
    m = np.array(a, order="F")
    m[np.diag_indices(n)] += shift
    c, info = lapack.dpotrf(m, lower=0, clean=1, overwrite_a=1)
    if info > 0:
        raise NotPositiveDefiniteError(pivot=info - 1)
    if info < 0:
        raise NumericError(f"dpotrf: illegal argument {-info}")
    z, info = lapack.dpotrs(c, b, lower=0)
    if info != 0:
        raise NumericError(f"dpotrs failed with info={info}")
    return np.ascontiguousarray(z)


def pairwise_sq_dists(x1, x2):
    """Squared Euclidean distances ‖x1ᵢ − x2ⱼ‖², negatives clamped to 0."""
    x1 = as_mat(x1, "x1")
    same = x2 is None or x2 is x1
    x2 = x1 if same else as_mat(x2, "x2")
    if x1.shape[1] != x2.shape[1]:
        raise ShapeError(f"column mismatch: {x1.shape[1]} vs {x2.shape[1]}")
    same = same or (x1.shape == x2.shape and np.array_equal(x1, x2))
    n1 = np.einsum("ij,ij->i", x1, x1)
    n2 = n1 if same else np.einsum("ij,ij->i", x2, x2)
    d = x1 @ x2.T
    d *= -2.0
    d += n1[:, None]
    d += n2[None, :]
    np.maximum(d, 0.0, out=d)
    if same:
        d += d.T
        d *= 0.5
        np.fill_diagonal(d, 0.0)
    return d
