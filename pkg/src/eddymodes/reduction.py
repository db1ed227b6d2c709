"""Split of the branch-current space into internal loops and electrode-fed
paths, and projection of the dynamics onto the internal part.

The basis already separates cycle columns (zero electrode flux) from path
columns, so the kernel selector K is a coordinate pick and the electrode
lift E^T (E E^T)^-1 is exact. A fraction-free integer kernel routine is
still provided for incidence matrices ingested from outside.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import linalg
from .assembly import BranchMatrices, CurrentBasis, IncidenceE
from .errors import DimensionMismatch, NotPositiveDefinite, RankDeficient


def _gram_chol(e: np.ndarray) -> linalg.LowerTriangular:
    msg = ("electrode incidence is rank deficient (duplicated or degenerate "
           "electrodes)")
    try:
        chol = linalg.cholesky(e @ e.T, what="electrode gram matrix")
    except NotPositiveDefinite as exc:
        raise RankDeficient(msg) from exc
    d = np.diag(chol.c)
    # an exactly singular gram matrix can round to a tiny positive pivot;
    # the factor diagonal is the square root of the pivot, hence 1e-7
    if d.min() <= 1e-7 * d.max():
        raise RankDeficient(msg)
    return chol


def lift_electrode_currents(e: IncidenceE | np.ndarray, i_d: np.ndarray) -> np.ndarray:
    """Minimum-norm basis coordinates realizing the port currents i_d:
    E^T (E E^T)^-1 i_d. Raises RankDeficient when E has dependent rows."""
    em = np.asarray(e.e if isinstance(e, IncidenceE) else e, dtype=float)
    i_d = np.asarray(i_d, dtype=float)
    if i_d.shape != (em.shape[0],):
        raise DimensionMismatch(f"expected {em.shape[0]} port currents, got {i_d.shape}")
    if em.shape[0] == 0:
        return np.zeros(em.shape[1])
    chol = _gram_chol(em)
    return em.T @ linalg.solve_cholesky(chol, i_d)


def lift_matrix(e: IncidenceE | np.ndarray) -> np.ndarray:
    """The full lift operator E^T (E E^T)^-1 as a dense matrix."""
    em = np.asarray(e.e if isinstance(e, IncidenceE) else e, dtype=float)
    n_ports = em.shape[0]
    if n_ports == 0:
        return np.zeros((em.shape[1], 0))
    chol = _gram_chol(em)
    cols = [linalg.solve_cholesky(chol, np.eye(n_ports)[:, k]) for k in range(n_ports)]
    return em.T @ np.column_stack(cols)


def integer_kernel(e: np.ndarray) -> np.ndarray:
    """Exact integer basis of the null space of an integer matrix by
    fraction-free (Bareiss-style) elimination over rationals.

    Used for externally supplied incidence matrices whose kernel is not a
    coordinate subspace. Columns are scaled to integer entries with no
    common factor.
    """
    e = np.asarray(e)
    rows, cols = e.shape
    m = [[Fraction(int(v)) for v in row] for row in e]
    pivot_col: list[int] = []
    r = 0
    for c in range(cols):
        pr = next((i for i in range(r, rows) if m[i][c] != 0), None)
        if pr is None:
            continue
        m[r], m[pr] = m[pr], m[r]
        pv = m[r][c]
        m[r] = [v / pv for v in m[r]]
        for i in range(rows):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivot_col.append(c)
        r += 1
        if r == rows:
            break
    free = [c for c in range(cols) if c not in pivot_col]
    basis = np.zeros((cols, len(free)), dtype=np.int64)
    for j, fc in enumerate(free):
        col = [Fraction(0)] * cols
        col[fc] = Fraction(1)
        for i, pc in enumerate(pivot_col):
            col[pc] = -m[i][fc]
        den = np.lcm.reduce([v.denominator for v in col]) if col else 1
        ints = np.array([int(v * den) for v in col], dtype=np.int64)
        g = np.gcd.reduce(np.abs(ints[ints != 0])) if np.any(ints) else 1
        basis[:, j] = ints // g
    return basis


@dataclass(frozen=True)
class ReducedModel:
    """Dynamics projected onto internal (zero electrode flux) currents.

    r_i, l_i: internal resistance/inductance (SPD, certified at build).
    r_d, l_d: port-current coupling columns entering the forcing term.
    m0: mutual columns of independent source coils.
    lift: basis coordinates per unit port current.
    k: kernel selector, basis coordinates of the internal subspace.
    basis: the branch-current basis, kept for reconstructing branch
    currents (observers need it); None for externally ingested matrices.
    """

    r_i: linalg.SymMatrix
    l_i: linalg.SymMatrix
    r_d: np.ndarray
    l_d: np.ndarray
    m0: np.ndarray
    lift: np.ndarray
    k: np.ndarray
    basis: CurrentBasis | None = None
    source_names: tuple[str, ...] = ()
    port_names: tuple[str, ...] = ()

    @property
    def n_internal(self) -> int:
        return self.k.shape[1]

    @property
    def n_ports(self) -> int:
        return self.lift.shape[1]

    @property
    def n_sources(self) -> int:
        return self.m0.shape[1]

    def branch_coordinates(self, i_internal: np.ndarray, i_d: np.ndarray) -> np.ndarray:
        """Total basis coordinates K I_i + lift i_d."""
        return self.k @ i_internal + self.lift @ i_d


def project_external(r_x: np.ndarray, l_x: np.ndarray, e_int: np.ndarray,
                     port_names: tuple[str, ...] = ()) -> ReducedModel:
    """Reduce an externally supplied (R_X, L_X, E) triple.

    The kernel selector comes from the exact integer null space of E, so
    arbitrary full-rank integer incidence matrices are accepted; there is
    no branch basis, so observers are unavailable on such models.
    """
    r_x = np.asarray(r_x, dtype=float)
    l_x = np.asarray(l_x, dtype=float)
    e_int = np.asarray(e_int)
    n_x = r_x.shape[0]
    if r_x.shape != (n_x, n_x) or l_x.shape != (n_x, n_x):
        raise DimensionMismatch("R_X and L_X must be square and equal-sized")
    if e_int.ndim != 2 or e_int.shape[1] != n_x:
        raise DimensionMismatch("E must have one column per basis coordinate")
    n_ports = e_int.shape[0]
    k_int = integer_kernel(e_int)
    if k_int.shape[1] != n_x - n_ports:
        raise RankDeficient(
            f"E has rank {n_x - k_int.shape[1]}, expected {n_ports}")
    k = k_int.astype(float)
    e = e_int.astype(float)
    r_i = linalg.SymMatrix.from_full(k.T @ r_x @ k)
    l_i = linalg.SymMatrix.from_full(k.T @ l_x @ k)
    if k.shape[1]:
        linalg.cholesky(r_i, what="internal resistance matrix")
        linalg.cholesky(l_i, what="internal inductance matrix")
    lift = lift_matrix(e)
    if n_ports:
        gram = _gram_chol(e)
        gram_inv = np.column_stack(
            [linalg.solve_cholesky(gram, np.eye(n_ports)[:, j]) for j in range(n_ports)])
        r_d = (k.T @ r_x @ e.T) @ gram_inv
        l_d = (k.T @ l_x @ e.T) @ gram_inv
    else:
        r_d = np.zeros((k.shape[1], 0))
        l_d = np.zeros((k.shape[1], 0))
    return ReducedModel(r_i=r_i, l_i=l_i, r_d=r_d, l_d=l_d,
                        m0=np.zeros((k.shape[1], 0)), lift=lift, k=k,
                        basis=None, port_names=tuple(port_names))


def project_model(bm: BranchMatrices, basis: CurrentBasis, e: IncidenceE,
                  m0: np.ndarray | None = None, md: np.ndarray | None = None,
                  source_names: tuple[str, ...] = (),
                  port_names: tuple[str, ...] = ()) -> ReducedModel:
    """Project branch matrices onto the basis and split off the ports.

    R_X = W^T R W and L_X = W^T L W over all basis columns; the internal
    blocks are the cycle-coordinate sub-blocks, the port couplings are
    R_ie (E E^T)^-1 and L_ie (E E^T)^-1 plus any bound-coil mutuals md.
    m0 and md arrive in basis coordinates from assemble_source_mutuals.
    """
    w = basis.w.astype(float)
    if bm.n != w.shape[0]:
        raise DimensionMismatch("branch matrices and basis disagree on branch count")
    n_x = basis.n_columns
    n_c = basis.n_cycles
    n_ports = e.n_ports
    if e.e.shape[1] != n_x:
        raise DimensionMismatch("incidence and basis disagree on column count")

    r_x = (w * bm.r_diag[:, None]).T @ w
    l_x = w.T @ bm.l_full @ w

    k = np.zeros((n_x, n_c))
    k[:n_c, :n_c] = np.eye(n_c)
    lift = lift_matrix(e)

    r_i = linalg.SymMatrix.from_full(r_x[:n_c, :n_c])
    l_i = linalg.SymMatrix.from_full(l_x[:n_c, :n_c])
    if n_c:
        linalg.cholesky(r_i, what="internal resistance matrix")
        linalg.cholesky(l_i, what="internal inductance matrix")

    if n_ports:
        r_ie = r_x[:n_c, :] @ e.e.T.astype(float)
        l_ie = l_x[:n_c, :] @ e.e.T.astype(float)
        gram = _gram_chol(e.e.astype(float))
        gram_inv_cols = np.column_stack(
            [linalg.solve_cholesky(gram, np.eye(n_ports)[:, j]) for j in range(n_ports)])
        r_d = r_ie @ gram_inv_cols
        l_d = l_ie @ gram_inv_cols
    else:
        r_d = np.zeros((n_c, 0))
        l_d = np.zeros((n_c, 0))

    if m0 is None:
        m0_i = np.zeros((n_c, 0))
    else:
        if m0.shape[0] != n_x:
            raise DimensionMismatch("m0 must have one row per basis column")
        m0_i = k.T @ m0
    if md is not None:
        if md.shape != (n_x, n_ports):
            raise DimensionMismatch("md must be (n_columns, n_ports)")
        l_d = l_d + k.T @ md

    return ReducedModel(r_i=r_i, l_i=l_i, r_d=r_d, l_d=l_d, m0=m0_i,
                        lift=lift, k=k, basis=basis,
                        source_names=tuple(source_names),
                        port_names=tuple(port_names))
