"""Generalized symmetric-definite eigendecomposition of the internal
dynamics and the modal coordinate transform.

The pencil (L_i, R_i) is reduced through the Cholesky factor of R_i,
which for filament networks is the better conditioned of the two, then
solved with the Jacobi eigensolver. Columns are normalized so every
per-mode resistance is exactly the target 1 ohm scale, which makes the
coordinate transform a plain R-weighted inner product and the per-mode
inductance numerically equal to the time constant.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels, linalg
from .errors import DimensionMismatch
from .reduction import ReducedModel


@dataclass(frozen=True)
class ModalBasis:
    """Generalized eigenpairs of L_i v = tau R_i v.

    v: (n, n) eigenvector columns, R-orthonormal, sign-fixed so the
    largest-magnitude entry of each column is positive.
    tau: time constants in seconds, descending.
    l_n, r_n: per-mode inductance (H) and resistance (ohm); r_n is 1 up
    to round-off by the normalization choice.
    vt_r: V^T R_i, the inverse coordinate map (equals V^-1 exactly in
    exact arithmetic thanks to R-orthonormality).
    """

    v: np.ndarray
    tau: np.ndarray
    l_n: np.ndarray
    r_n: np.ndarray
    vt_r: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.tau.shape[0]


def generalized_eig(l_i: linalg.SymMatrix | np.ndarray,
                    r_i: linalg.SymMatrix | np.ndarray) -> ModalBasis:
    """Solve L_i V = tau R_i V for an SPD pair.

    Reduction: R_i = G G^T, B = G^-1 L_i G^-T (symmetrized), Jacobi on B,
    V = G^-T U, tau descending. Raises NotPositiveDefinite if either
    matrix fails its Cholesky certificate.
    """
    lm = l_i.full if isinstance(l_i, linalg.SymMatrix) else np.asarray(l_i, dtype=float)
    rm = r_i.full if isinstance(r_i, linalg.SymMatrix) else np.asarray(r_i, dtype=float)
    if lm.shape != rm.shape:
        raise DimensionMismatch("L_i and R_i must have the same shape")
    n = lm.shape[0]
    if n == 0:
        z = np.zeros(0)
        zz = np.zeros((0, 0))
        return ModalBasis(v=zz, tau=z, l_n=z, r_n=z, vt_r=zz)
    g = linalg.cholesky(rm, what="modal resistance matrix")
    b = lm.copy()
    _kernels.tri_lower_solve_mat(g.c, b)            # G^-1 L
    bt = np.ascontiguousarray(b.T)
    _kernels.tri_lower_solve_mat(g.c, bt)           # G^-1 (G^-1 L)^T = B^T
    b = 0.5 * (bt + bt.T)
    # cholesky(L) is only run for its SPD certificate on the pencil
    linalg.cholesky(lm, what="modal inductance matrix")
    tau, u = linalg.sym_eig(b)
    v = np.ascontiguousarray(u)
    _kernels.tri_lower_t_solve_mat(g.c, v)          # G^-T U
    # deterministic column signs: largest-magnitude entry positive
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(n)])
    signs[signs == 0] = 1.0
    v = v * signs[None, :]
    l_n = np.einsum("ij,ij->j", v, lm @ v)
    r_n = np.einsum("ij,ij->j", v, rm @ v)
    return ModalBasis(v=v, tau=tau.copy(), l_n=l_n, r_n=r_n, vt_r=v.T @ rm)


def to_modal(basis: ModalBasis, i_internal: np.ndarray) -> np.ndarray:
    """Modal coordinates V^T R_i I of an internal current vector."""
    i_internal = np.asarray(i_internal, dtype=float)
    if i_internal.shape != (basis.n_modes,):
        raise DimensionMismatch(
            f"expected {basis.n_modes} components, got {i_internal.shape}")
    return basis.vt_r @ i_internal


def from_modal(basis: ModalBasis, modal: np.ndarray) -> np.ndarray:
    """Internal current vector V m from modal coordinates."""
    modal = np.asarray(modal, dtype=float)
    if modal.shape != (basis.n_modes,):
        raise DimensionMismatch(f"expected {basis.n_modes} components, got {modal.shape}")
    return basis.v @ modal


def modal_forcing(basis: ModalBasis, rm: ReducedModel, i_d: np.ndarray,
                  delta_i_d: np.ndarray, delta_i0: np.ndarray,
                  dt: float, theta: float) -> np.ndarray:
    """Per-mode forcing increment: V^T applied to the drive part of the
    coupled theta-step right-hand side,
    -dt R_D i_D - (L_D + dt theta R_D) delta_i_D - M0 delta_i0.
    Using the identical discrete expression on both paths is what makes
    the coupled and decoupled updates algebraically equivalent.
    """
    i_d = np.asarray(i_d, dtype=float)
    delta_i_d = np.asarray(delta_i_d, dtype=float)
    delta_i0 = np.asarray(delta_i0, dtype=float)
    if i_d.shape != (rm.n_ports,) or delta_i_d.shape != (rm.n_ports,):
        raise DimensionMismatch(f"expected {rm.n_ports} port currents")
    if delta_i0.shape != (rm.n_sources,):
        raise DimensionMismatch(f"expected {rm.n_sources} source increments")
    rhs = drive_rhs(rm, i_d, delta_i_d, delta_i0, dt, theta)
    return basis.v.T @ rhs


def drive_rhs(rm: ReducedModel, i_d: np.ndarray, delta_i_d: np.ndarray,
              delta_i0: np.ndarray, dt: float, theta: float) -> np.ndarray:
    """Drive part of the coupled theta-step right-hand side (state term
    excluded), shared verbatim by both time-domain paths."""
    rhs = np.zeros(rm.n_internal)
    if rm.n_ports:
        rhs -= dt * (rm.r_d @ i_d)
        rhs -= (rm.l_d + dt * theta * rm.r_d) @ delta_i_d
    if rm.n_sources:
        rhs -= rm.m0 @ delta_i0
    return rhs


def write_modal_csv(path, basis: ModalBasis, header_lines: tuple[str, ...] = ()):
    """Mode table export: n, tau_s, L_n_H, R_n_ohm."""
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("n,tau_s,L_n_H,R_n_ohm\n")
        for i in range(basis.n_modes):
            fh.write(f"{i},{float(basis.tau[i])!r},{float(basis.l_n[i])!r},"
                     f"{float(basis.r_n[i])!r}\n")
