"""Dense and sparse matrix kernels, symmetric eigensolvers and small SPD inversion."""

from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .constants import JACOBI_MAX_SWEEPS, JACOBI_TOL, SPD_MIN_EIGENVALUE, SYMMETRY_TOL
from .exceptions import NumericalError, ShapeError

EigenMethod = Literal["lapack", "jacobi"]


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues in descending order; column i of eigenvectors pairs with eigenvalue i."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_dense(m, name: str = "matrix") -> np.ndarray:
    """Return m as a 2-D float64 C-ordered array."""
    if sp.issparse(m):
        m = m.toarray()
    array = np.ascontiguousarray(m, dtype=np.float64)
    if array.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {array.shape}")
    return array


def as_csr(m) -> sp.csr_matrix:
    """Return m as a canonical CSR matrix (sorted, deduplicated column indices)."""
    csr = sp.csr_matrix(m, dtype=np.float64)
    csr.sum_duplicates()
    csr.sort_indices()
    csr.eliminate_zeros()
    return csr


def densify(s: sp.spmatrix) -> np.ndarray:
    """Dense copy of a sparse matrix."""
    return np.asarray(s.toarray(), dtype=np.float64)


def _check_finite(result: np.ndarray, operation: str) -> np.ndarray:
    if not np.all(np.isfinite(result)):
        raise NumericalError(f"{operation} produced non-finite values")
    return result


def gemm(
    a: np.ndarray,
    b: np.ndarray,
    transpose_a: bool = False,
    transpose_b: bool = False,
) -> np.ndarray:
    """
    Dense matrix product op(a) @ op(b).

    Args:
        a: Left operand
        b: Right operand
        transpose_a: Use aᵀ instead of a
        transpose_b: Use bᵀ instead of b

    Returns:
        Product matrix
    """
    left = a.T if transpose_a else a
    right = b.T if transpose_b else b
    if left.ndim != 2 or right.ndim != 2:
        raise ShapeError("gemm operands must be 2-D")
    if left.shape[1] != right.shape[0]:
        raise ShapeError(
            f"gemm inner dimensions differ: {left.shape} x {right.shape} "
            f"(transpose_a={transpose_a}, transpose_b={transpose_b})"
        )
    return _check_finite(np.matmul(left, right), "gemm")


def spmm(s: sp.spmatrix, d: np.ndarray) -> np.ndarray:
    """Sparse-times-dense product s @ d."""
    if d.ndim != 2:
        raise ShapeError("spmm dense operand must be 2-D")
    if s.shape[1] != d.shape[0]:
        raise ShapeError(f"spmm dimensions differ: {s.shape} x {d.shape}")
    return _check_finite(np.asarray(s @ d, dtype=np.float64), "spmm")


def symmetrize(m: np.ndarray) -> np.ndarray:
    """(M + Mᵀ) / 2 for a square matrix within the symmetry tolerance."""
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {m.shape}")
    asymmetry = np.max(np.abs(m - m.T)) if m.size else 0.0
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    if asymmetry > SYMMETRY_TOL * scale:
        raise ShapeError(f"matrix is not symmetric (max |M - Mᵀ| = {asymmetry:.3e})")
    return 0.5 * (m + m.T)


def _jacobi_eig(m: np.ndarray, max_sweeps: int) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi rotations until every off-diagonal entry is below tol·‖M‖_F."""
    a = m.copy()
    n = a.shape[0]
    v = np.eye(n)
    threshold = JACOBI_TOL * np.linalg.norm(a)

    for _ in range(max_sweeps):
        off = np.abs(a - np.diag(np.diag(a)))
        if n < 2 or off.max() < threshold or off.max() == 0.0:
            return np.diag(a).copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < threshold:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0

                vec_p = v[:, p].copy()
                v[:, p] = c * vec_p - v[:, q] * s
                v[:, q] = s * vec_p + c * v[:, q]

    raise NumericalError(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")


def sym_eig(
    m: np.ndarray,
    method: EigenMethod = "lapack",
    max_sweeps: int = JACOBI_MAX_SWEEPS,
) -> EigenDecomposition:
    """
    Full eigendecomposition of a symmetric matrix.

    Args:
        m: Square matrix, symmetric to 1e-10 (symmetrized internally)
        method: "lapack" (numpy.linalg.eigh) or "jacobi" (cyclic Jacobi)
        max_sweeps: Sweep bound for the Jacobi solver

    Returns:
        EigenDecomposition with eigenvalues sorted descending
    """
    sym = symmetrize(as_dense(m))
    if not np.all(np.isfinite(sym)):
        raise NumericalError("sym_eig input contains non-finite values")

    if method == "jacobi":
        values, vectors = _jacobi_eig(sym, max_sweeps)
    elif method == "lapack":
        values, vectors = np.linalg.eigh(sym)
    else:
        raise ValueError(f"Unknown eigen method: {method!r}")

    order = np.argsort(-values, kind="stable")
    return EigenDecomposition(
        eigenvalues=np.ascontiguousarray(values[order]),
        eigenvectors=np.ascontiguousarray(vectors[:, order]),
    )


def small_inverse(m: np.ndarray) -> np.ndarray:
    """
    Inverse of a small symmetric positive definite matrix via Cholesky.

    Args:
        m: SPD matrix, all eigenvalues > 1e-12

    Returns:
        m⁻¹
    """
    sym = symmetrize(as_dense(m))
    n = sym.shape[0]
    if n == 0:
        return np.zeros((0, 0))

    smallest = float(np.linalg.eigvalsh(sym)[0])
    if smallest <= SPD_MIN_EIGENVALUE:
        raise NumericalError(
            f"matrix is not symmetric positive definite (smallest eigenvalue {smallest:.3e})"
        )
    factor = scipy.linalg.cho_factor(sym, lower=True)
    inverse = scipy.linalg.cho_solve(factor, np.eye(n))
    return _check_finite(0.5 * (inverse + inverse.T), "small_inverse")


def frobenius_sq(m: np.ndarray) -> float:
    """Sum of squared entries."""
    return float(np.sum(np.square(m)))
