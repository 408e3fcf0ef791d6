"""Direct solution of the assembled systems.

Factorization is delegated to scipy (banded Cholesky/LU when the matrix is
narrow-banded, SuperLU with partial pivoting otherwise); this module owns
the contracts: finiteness screening, a scaled-partial-pivoting singularity
diagnosis that reports the offending pivot, and a relative-residual
guarantee on every solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

RESIDUAL_TOL = 1e-10
PIVOT_THRESHOLD = 1e-14


class LinearSolveError(Exception):
    pass


class NonFiniteSystemError(LinearSolveError):
    pass


class SingularMatrixError(LinearSolveError):
    def __init__(self, message: str, pivot_index: int | None = None):
        super().__init__(message)
        self.pivot_index = pivot_index


@dataclass
class SparseSystem:
    """Sparse linear system A x = b."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    symmetric: bool = False

    def __post_init__(self):
        self.matrix = sp.csr_matrix(self.matrix)
        self.matrix.eliminate_zeros()
        self.rhs = np.asarray(self.rhs, dtype=float)
        if self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError(f"matrix must be square, got {self.matrix.shape}")
        if self.rhs.shape[0] != self.matrix.shape[0]:
            raise ValueError("rhs length does not match matrix dimension")

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def _bandwidth(a: sp.csr_matrix) -> int:
    coo = a.tocoo()
    if coo.nnz == 0:
        return 0
    return int(np.max(np.abs(coo.row - coo.col)))


def _find_singular_pivot(dense: np.ndarray) -> int:
    """Gaussian elimination with scaled partial pivoting; returns the index
    of the first pivot falling below the relative threshold."""
    a = dense.copy()
    n = a.shape[0]
    scale = np.max(np.abs(a), axis=1)
    scale[scale == 0.0] = 1.0
    perm = np.arange(n)
    for k in range(n):
        col = np.abs(a[k:, k]) / scale[perm[k:]]
        j = k + int(np.argmax(col))
        if col[j - k] <= PIVOT_THRESHOLD:
            return k
        if j != k:
            a[[k, j]] = a[[j, k]]
            perm[[k, j]] = perm[[j, k]]
        a[k + 1 :, k:] -= np.outer(a[k + 1 :, k] / a[k, k], a[k, k:])
    return n - 1


def _residual_ratio(a: sp.csr_matrix, x: np.ndarray, b: np.ndarray) -> float:
    num = np.linalg.norm(a @ x - b)
    den = sp.linalg.norm(a) * np.linalg.norm(x) + np.linalg.norm(b)
    return num / den if den > 0 else num


def solve_direct(system: SparseSystem) -> np.ndarray:
    """Solve the system directly, raising on singular or non-finite input.

    Postcondition: ||Ax - b|| / (||A||_F ||x|| + ||b||) <= 1e-10, enforced
    with one step of iterative refinement if needed.
    """
    a, b = system.matrix, system.rhs
    if not np.all(np.isfinite(a.data)) or not np.all(np.isfinite(b)):
        raise NonFiniteSystemError("system contains non-finite entries")
    n = system.n

    def diagnose(err) -> SingularMatrixError:
        pivot = None
        if n <= 4000:
            pivot = _find_singular_pivot(a.toarray())
        return SingularMatrixError(f"singular system: {err}", pivot_index=pivot)

    band = _bandwidth(a)
    x = None
    try:
        if band + 1 < n / 4 and n > 8:
            dense_band = np.zeros((2 * band + 1, n))
            coo = a.tocoo()
            dense_band[band + coo.row - coo.col, coo.col] = coo.data
            if system.symmetric:
                try:
                    x = sla.solveh_banded(dense_band[: band + 1], b, lower=False)
                except np.linalg.LinAlgError:
                    x = sla.solve_banded((band, band), dense_band, b)
            else:
                x = sla.solve_banded((band, band), dense_band, b)
        else:
            lu = spla.splu(a.tocsc())
            x = lu.solve(b)
    except (RuntimeError, np.linalg.LinAlgError, ValueError) as err:
        raise diagnose(err) from err
    if not np.all(np.isfinite(x)):
        raise diagnose("non-finite solution")

    ratio = _residual_ratio(a, x, b)
    if ratio > RESIDUAL_TOL:
        # one step of iterative refinement via a fresh LU
        lu = spla.splu(a.tocsc())
        x = x + lu.solve(b - a @ x)
        ratio = _residual_ratio(a, x, b)
        if ratio > RESIDUAL_TOL:
            raise LinearSolveError(
                f"residual {ratio:.3e} exceeds tolerance {RESIDUAL_TOL:.1e}"
            )
    return x
