"""Sparse storage and solvers.

Matrices are ``scipy.sparse.csr_matrix`` in canonical form (sorted column
indices, no duplicates).  Direct solves go through SuperLU with a minimum
degree ordering of A + A^T and threshold partial pivoting that prefers the
diagonal (the block systems are structurally symmetric); the conjugate
gradient method is implemented here so that indefiniteness can be reported.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


class SingularMatrix(SolverError):
    pass


class NotSPD(SolverError):
    pass


class MaxIterations(SolverError):
    def __init__(self, msg, iterate=None, iterations=0):
        super().__init__(msg)
        self.iterate = iterate
        self.iterations = iterations


def as_csr(A) -> sp.csr_matrix:
    """Canonical CSR copy: sorted indices, duplicates summed, float64."""
    A = sp.csr_matrix(A, dtype=float, copy=True)
    A.sum_duplicates()
    A.sort_indices()
    return A


@dataclass(frozen=True, eq=False)
class Factorization:
    """Sparse LU factors of the scaled matrix diag(r) A diag(c)."""

    lu: spla.SuperLU
    shape: tuple
    matrix: sp.csr_matrix
    row_scale: np.ndarray
    col_scale: np.ndarray
    pivot_threshold: float
    refine: bool = False
    ordering: str = "MMD_AT_PLUS_A"

    @property
    def perm_r(self):
        return self.lu.perm_r

    @property
    def perm_c(self):
        return self.lu.perm_c

    @property
    def nnz(self) -> int:
        return self.lu.L.nnz + self.lu.U.nnz


def _equilibrate(A: sp.csr_matrix):
    """Symmetric scaling s_i = |a_ii|^(-1/2); rows with a zero diagonal use
    the geometric mean of their row and column maxima instead."""
    absA = abs(A)
    rmax = absA.max(axis=1).toarray().ravel()
    cmax = absA.max(axis=0).toarray().ravel()
    if np.any(rmax == 0.0) or np.any(cmax == 0.0):
        raise SingularMatrix("matrix has an empty row or column")
    d = np.abs(A.diagonal())
    d = np.where(d > 0.0, d, np.sqrt(rmax * cmax))
    s = 1.0 / np.sqrt(d)
    return s, s


def lu_factor(A, pivot_threshold: float = 0.1, singular_tol: float = 1e-14,
              refine: bool = False, ordering: str = "MMD_AT_PLUS_A") -> Factorization:
    """Threshold-pivoted sparse LU.

    The matrix is scaled symmetrically to a unit diagonal first; a pivot
    smaller than ``singular_tol`` times the largest scaled entry raises
    ``SingularMatrix``.
    """
    A = as_csr(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"lu_factor needs a square matrix, got {A.shape}")
    if A.nnz == 0:
        raise SingularMatrix("zero matrix")
    r, c = _equilibrate(A)
    S = (sp.diags(r) @ A @ sp.diags(c)).tocsc()
    scale = abs(S).max()
    try:
        lu = spla.splu(
            S,
            permc_spec=ordering,
            diag_pivot_thresh=pivot_threshold,
            options={"SymmetricMode": True, "Equil": False},
        )
    except RuntimeError as exc:  # SuperLU reports exact singularity this way
        raise SingularMatrix(str(exc)) from exc
    piv = np.abs(lu.U.diagonal())
    if piv.size and piv.min() < singular_tol * scale:
        raise SingularMatrix(
            f"pivot {piv.min():.3e} below {singular_tol:g} * max|A| = {singular_tol * scale:.3e}"
        )
    return Factorization(lu, A.shape, A, r, c, pivot_threshold, refine, ordering)


def solve(f: Factorization, b) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.shape[0] != f.shape[0]:
        raise ValueError(f"right-hand side has length {b.shape[0]}, expected {f.shape[0]}")
    rs = f.row_scale if b.ndim == 1 else f.row_scale[:, None]
    cs = f.col_scale if b.ndim == 1 else f.col_scale[:, None]
    x = cs * f.lu.solve(rs * b)
    if f.refine:
        x = x + cs * f.lu.solve(rs * (b - f.matrix @ x))
    return x


def residual_ok(A, x, b, tol=1e-9) -> bool:
    """Check ||Ax - b|| <= tol (||A||_inf ||x||_inf + ||b||_inf)."""
    r = A @ x - b
    normA = abs(A).sum(axis=1).max()
    return float(np.max(np.abs(r), initial=0.0)) <= tol * (
        normA * np.max(np.abs(x), initial=0.0) + np.max(np.abs(b), initial=0.0)
    )


@dataclass
class CGStats:
    iterations: int = 0
    residuals: list = field(default_factory=list)


def cg_solve(A, b, tol: float = 1e-10, maxit: int | None = None, x0=None,
             stats: CGStats | None = None) -> np.ndarray:
    """Conjugate gradients for SPD ``A`` (matrix or callable matvec).

    Stops when ||b - Ax|| <= tol ||b||.  Raises ``NotSPD`` on a direction
    with p^T A p <= 0 and ``MaxIterations`` (with the last iterate) when the
    budget runs out.
    """
    matvec = A if callable(A) else (lambda v: A @ v)
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    maxit = maxit if maxit is not None else 10 * n
    stats = stats if stats is not None else CGStats()
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n)
    r = b - matvec(x) if x0 is not None else b.copy()
    p = r.copy()
    rr = r @ r
    stats.residuals.append(np.sqrt(rr) / bnorm)
    if np.sqrt(rr) <= tol * bnorm:
        return x
    for k in range(1, maxit + 1):
        Ap = matvec(p)
        pAp = p @ Ap
        if pAp <= 0.0:
            raise NotSPD(f"p^T A p = {pAp:.3e} at iteration {k}")
        alpha = rr / pAp
        x += alpha * p
        r -= alpha * Ap
        rr_new = r @ r
        stats.iterations = k
        stats.residuals.append(np.sqrt(rr_new) / bnorm)
        if np.sqrt(rr_new) <= tol * bnorm:
            return x
        p = r + (rr_new / rr) * p
        rr = rr_new
    raise MaxIterations(f"CG did not reach tol={tol:g} in {maxit} iterations", x, maxit)


def schur_matvec(rho, A_fact: Factorization, B, M, u) -> np.ndarray:
    """(M + rho B^T A^{-1} B) u."""
    u = np.asarray(u, dtype=float)
    if rho == 0:
        return M @ u
    return M @ u + rho * (B.T @ solve(A_fact, B @ u))


# ---------------------------------------------------------------- file formats


def write_matrix_market(path, A, comment: str = ""):
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), comment=comment, field="real", precision=17)


def read_matrix_market(path) -> sp.csr_matrix:
    return as_csr(scipy.io.mmread(str(path)))


def write_vector(path, v):
    """Little-endian int64 length followed by float64 values."""
    v = np.ascontiguousarray(v, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(np.int64(v.size).astype("<i8").tobytes())
        fh.write(v.tobytes())


def read_vector(path) -> np.ndarray:
    with open(path, "rb") as fh:
        n = int(np.frombuffer(fh.read(8), dtype="<i8")[0])
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n:
        raise ValueError(f"vector file declares {n} entries but holds {data.size}")
    return data.astype(float)
