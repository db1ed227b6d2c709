"""Dense symmetric linear algebra used by every other module.

Cholesky factorization, triangular solves, a cyclic-Jacobi symmetric
eigensolver, and a pivoted LU (used only by the frequency-domain path).
All algorithms are self-contained compiled kernels, chosen over BLAS
bindings so that factor and solve costs scale with their true operation
counts at desk-scale sizes and results are reproducible bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DimensionMismatch, NoConvergence, NotPositiveDefinite, SingularSystem

#: Jacobi convergence: off-diagonal Frobenius norm below this times ||A||_F.
JACOBI_TOL = 1e-14
#: Hard sweep limit for the Jacobi eigensolver.
JACOBI_MAX_SWEEPS = 50


@dataclass(frozen=True)
class SymMatrix:
    """Dense symmetric matrix built from its lower triangle.

    The stored array is the lower triangle mirrored, so ``a == a.T`` holds
    exactly (entrywise bitwise), not just to round-off.
    """

    a: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            # order 0 is tolerated only for the degenerate no-internal-current
            # reduced model; every solver op expects order >= 1
            raise DimensionMismatch(f"square matrix required, got {a.shape}")
        lower = np.tril(a)
        object.__setattr__(self, "a", lower + np.tril(lower, -1).T)

    @classmethod
    def from_full(cls, a: np.ndarray, tol: float = 1e-10) -> "SymMatrix":
        """Build from a nearly symmetric full matrix; rejects asymmetry
        above tol relative to the largest entry."""
        a = np.asarray(a, dtype=float)
        scale = np.abs(a).max() if a.size else 0.0
        if scale > 0 and np.abs(a - a.T).max() > tol * scale:
            raise DimensionMismatch("matrix is not symmetric within tolerance")
        return cls(a)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def full(self) -> np.ndarray:
        return self.a


@dataclass(frozen=True)
class LowerTriangular:
    """Lower-triangular Cholesky factor; positive diagonal certifies that
    the factored matrix was positive definite."""

    c: np.ndarray

    def __post_init__(self):
        c = np.ascontiguousarray(np.tril(np.asarray(self.c, dtype=float)))
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise DimensionMismatch(f"square matrix required, got {c.shape}")
        d = np.diag(c)
        if not np.all(d > 0.0):
            raise NotPositiveDefinite(int(np.argmin(d > 0.0)), "triangular factor")
        object.__setattr__(self, "c", c)

    @property
    def n(self) -> int:
        return self.c.shape[0]


def _as_square(a) -> np.ndarray:
    if isinstance(a, SymMatrix):
        return a.full
    a = np.ascontiguousarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"square matrix required, got {a.shape}")
    return a


def cholesky(a: SymMatrix | np.ndarray, what: str = "matrix") -> LowerTriangular:
    """Factor a symmetric positive-definite matrix as C C^T.

    Raises NotPositiveDefinite with the failing pivot index otherwise,
    which in this code base always means a non-physical model (zero or
    negative resistivity, degenerate geometry).
    """
    a = _as_square(a)
    c = np.zeros_like(a)
    pivot = _kernels.cholesky_kernel(a, c)
    if pivot >= 0:
        raise NotPositiveDefinite(int(pivot), what)
    return LowerTriangular(c)


def solve_cholesky(c: LowerTriangular, b: np.ndarray) -> np.ndarray:
    """Solve (C C^T) x = b by forward and backward substitution."""
    cm = c.c if isinstance(c, LowerTriangular) else np.ascontiguousarray(c, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    if b.shape != (cm.shape[0],):
        raise DimensionMismatch(f"rhs shape {b.shape} does not match order {cm.shape[0]}")
    y = np.empty_like(b)
    x = np.empty_like(b)
    _kernels.tri_solve_vec(cm, b, y, x)
    return x


def sym_eig(a: SymMatrix | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi.

    Returns (eigenvalues, eigenvectors) with eigenvalues sorted descending,
    ties broken by original index order, and orthonormal eigenvector columns.
    Raises NoConvergence if the sweep limit is exceeded (pathological input).
    """
    a = _as_square(a).copy()
    n = a.shape[0]
    v = np.eye(n)
    sweeps = _kernels.jacobi_sym_eig(a, v, JACOBI_MAX_SWEEPS, JACOBI_TOL)
    if sweeps < 0:
        raise NoConvergence(f"Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps")
    lam = np.diag(a).copy()
    order = np.argsort(-lam, kind="stable")
    return lam[order], np.ascontiguousarray(v[:, order])


def lu_factor(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pivoted LU of a general square matrix. Raises SingularSystem on an
    exactly zero pivot."""
    a = np.ascontiguousarray(a, dtype=float).copy()
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"square matrix required, got {a.shape}")
    piv = np.zeros(a.shape[0], dtype=np.int64)
    col = _kernels.lu_factor_kernel(a, piv)
    if col >= 0:
        raise SingularSystem(f"zero pivot in column {col}")
    return a, piv


def lu_solve(lu_piv: tuple[np.ndarray, np.ndarray], b: np.ndarray) -> np.ndarray:
    lu, piv = lu_piv
    x = np.ascontiguousarray(b, dtype=float).copy()
    if x.shape != (lu.shape[0],):
        raise DimensionMismatch(f"rhs shape {x.shape} does not match order {lu.shape[0]}")
    _kernels.lu_solve_kernel(lu, piv, x)
    return x
