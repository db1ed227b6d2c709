"""Compiled numerical kernels.

Everything here is sequential scalar code compiled with numba. The point is
twofold: the dense factorizations and the per-step updates keep their true
arithmetic cost (no BLAS call overhead masking the N^2 vs N per-step scaling
at desk sizes), and results are bitwise reproducible run to run. fastmath is
deliberately off everywhere: the decoupled per-mode update must reproduce the
coupled 1x1 update bitwise, which requires strict IEEE semantics.
"""
from __future__ import annotations

import numpy as np
from numba import njit


# --- dense symmetric linear algebra ----------------------------------------

@njit(cache=True)
def cholesky_kernel(a, c):
    """Lower Cholesky of symmetric a into c. Returns -1 on success, else the
    index of the first non-positive pivot."""
    n = a.shape[0]
    for j in range(n):
        s = a[j, j]
        for k in range(j):
            s -= c[j, k] * c[j, k]
        if not (s > 0.0):
            return j
        cjj = np.sqrt(s)
        c[j, j] = cjj
        for i in range(j + 1, n):
            s = a[i, j]
            for k in range(j):
                s -= c[i, k] * c[j, k]
            c[i, j] = s / cjj
    return -1


@njit(cache=True)
def tri_solve_vec(c, b, y, x):
    """Solve (c c^T) x = b by forward then backward substitution.
    y is scratch for the intermediate forward solution."""
    n = c.shape[0]
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= c[i, k] * y[k]
        y[i] = s / c[i, i]
    for i in range(n - 1, -1, -1):
        s = y[i]
        for k in range(i + 1, n):
            s -= c[k, i] * x[k]
        x[i] = s / c[i, i]


@njit(cache=True)
def tri_lower_solve_mat(c, b):
    """In-place forward substitution on every column of b: b <- c^-1 b."""
    n = c.shape[0]
    m = b.shape[1]
    for j in range(m):
        for i in range(n):
            s = b[i, j]
            for k in range(i):
                s -= c[i, k] * b[k, j]
            b[i, j] = s / c[i, i]


@njit(cache=True)
def tri_lower_t_solve_mat(c, b):
    """In-place backward substitution on every column of b: b <- c^-T b."""
    n = c.shape[0]
    m = b.shape[1]
    for j in range(m):
        for i in range(n - 1, -1, -1):
            s = b[i, j]
            for k in range(i + 1, n):
                s -= c[k, i] * b[k, j]
            b[i, j] = s / c[i, i]


@njit(cache=True)
def jacobi_sym_eig(a, v, max_sweeps, tol_rel):
    """Cyclic Jacobi rotations on symmetric a (destroyed; eigenvalues end up
    on the diagonal). v accumulates the rotations and must start as identity.
    Converged when the off-diagonal Frobenius norm drops below
    tol_rel * ||a||_F. Returns the sweep count, or -1 if max_sweeps was hit.
    """
    n = a.shape[0]
    fro = 0.0
    for i in range(n):
        for j in range(n):
            fro += a[i, j] * a[i, j]
    fro = np.sqrt(fro)
    if fro == 0.0:
        return 0
    thresh = tol_rel * fro
    for sweep in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += a[i, j] * a[i, j]
        if np.sqrt(2.0 * off) <= thresh:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                cth = 1.0 / np.sqrt(1.0 + t * t)
                sth = t * cth
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = cth * akp - sth * akq
                    a[k, q] = sth * akp + cth * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = cth * apk - sth * aqk
                    a[q, k] = sth * apk + cth * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = cth * vkp - sth * vkq
                    v[k, q] = sth * vkp + cth * vkq
    # one last check: the final sweep may have converged exactly at the limit
    off = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            off += a[i, j] * a[i, j]
    if np.sqrt(2.0 * off) <= thresh:
        return max_sweeps
    return -1


@njit(cache=True)
def lu_factor_kernel(a, piv):
    """In-place LU with partial pivoting. piv records row swaps.
    Returns -1 on success, else the column with an exactly zero pivot."""
    n = a.shape[0]
    for k in range(n):
        pmax = abs(a[k, k])
        prow = k
        for i in range(k + 1, n):
            v = abs(a[i, k])
            if v > pmax:
                pmax = v
                prow = i
        if pmax == 0.0:
            return k
        piv[k] = prow
        if prow != k:
            for j in range(n):
                tmp = a[k, j]
                a[k, j] = a[prow, j]
                a[prow, j] = tmp
        akk = a[k, k]
        for i in range(k + 1, n):
            lik = a[i, k] / akk
            a[i, k] = lik
            for j in range(k + 1, n):
                a[i, j] -= lik * a[k, j]
    return -1


@njit(cache=True)
def lu_solve_kernel(lu, piv, b):
    """Solve using a factor from lu_factor_kernel; b is overwritten by x.
    All row swaps go first: the stored multipliers belong to the fully
    pivoted matrix, so interleaving swaps with elimination would mix rows."""
    n = lu.shape[0]
    for k in range(n):
        p = piv[k]
        if p != k:
            tmp = b[k]
            b[k] = b[p]
            b[p] = tmp
    for k in range(n):
        for i in range(k + 1, n):
            b[i] -= lu[i, k] * b[k]
    for i in range(n - 1, -1, -1):
        s = b[i]
        for k in range(i + 1, n):
            s -= lu[i, k] * b[k]
        b[i] = s / lu[i, i]


# --- theta-method stepping ---------------------------------------------------

@njit(cache=True)
def td1_step_kernel(c, r_i, state, dt, extra, b, y, x):
    """One coupled theta step: solve (c c^T) dI = -dt*(r_i @ state) + extra,
    then state += dI. b, y, x are scratch vectors of the state size."""
    n = c.shape[0]
    for i in range(n):
        s = 0.0
        for k in range(n):
            s += r_i[i, k] * state[k]
        b[i] = -dt * s + extra[i]
    tri_solve_vec(c, b, y, x)
    for i in range(n):
        state[i] += x[i]


@njit(cache=True)
def td2_step_kernel(state, r_n, c_n, dt, forcing):
    """One decoupled step over all modes. c_n holds sqrt(L_n + dt*theta*R_n);
    dividing twice by the Cholesky factor, instead of once by its square,
    makes a one-mode system reproduce td1_step_kernel bitwise."""
    n = state.shape[0]
    for i in range(n):
        s = r_n[i] * state[i]
        num = -dt * s + forcing[i]
        state[i] += (num / c_n[i]) / c_n[i]


# --- filament-pair quadrature -------------------------------------------------

@njit(cache=True)
def seg_seg_distance(a0, a1, b0, b1):
    """Minimum distance between two 3-D segments (clamped closest points)."""
    dax = a1[0] - a0[0]
    day = a1[1] - a0[1]
    daz = a1[2] - a0[2]
    dbx = b1[0] - b0[0]
    dby = b1[1] - b0[1]
    dbz = b1[2] - b0[2]
    rx = a0[0] - b0[0]
    ry = a0[1] - b0[1]
    rz = a0[2] - b0[2]
    aa = dax * dax + day * day + daz * daz
    bb = dbx * dbx + dby * dby + dbz * dbz
    ab = dax * dbx + day * dby + daz * dbz
    ar = dax * rx + day * ry + daz * rz
    br = dbx * rx + dby * ry + dbz * rz
    den = aa * bb - ab * ab
    if den > 1e-14 * aa * bb:
        s = (ab * br - bb * ar) / den
    else:
        s = 0.0
    if s < 0.0:
        s = 0.0
    elif s > 1.0:
        s = 1.0
    if bb > 0.0:
        t = (ab * s + br) / bb
    else:
        t = 0.0
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    if aa > 0.0:
        s = (ab * t - ar) / aa
        if s < 0.0:
            s = 0.0
        elif s > 1.0:
            s = 1.0
    px = a0[0] + s * dax - (b0[0] + t * dbx)
    py = a0[1] + s * day - (b0[1] + t * dby)
    pz = a0[2] + s * daz - (b0[2] + t * dbz)
    return np.sqrt(px * px + py * py + pz * pz)


@njit(cache=True)
def gauss_pair(a0, a1, b0, b1, xg, wg):
    """Tensor Gauss-Legendre approximation of the double line integral
    of 1/|x - x'| over two straight segments (lengths folded in)."""
    dax = a1[0] - a0[0]
    day = a1[1] - a0[1]
    daz = a1[2] - a0[2]
    dbx = b1[0] - b0[0]
    dby = b1[1] - b0[1]
    dbz = b1[2] - b0[2]
    la = np.sqrt(dax * dax + day * day + daz * daz)
    lb = np.sqrt(dbx * dbx + dby * dby + dbz * dbz)
    q = xg.shape[0]
    acc = 0.0
    for ia in range(q):
        pax = a0[0] + xg[ia] * dax
        pay = a0[1] + xg[ia] * day
        paz = a0[2] + xg[ia] * daz
        inner = 0.0
        for ib in range(q):
            ddx = pax - (b0[0] + xg[ib] * dbx)
            ddy = pay - (b0[1] + xg[ib] * dby)
            ddz = paz - (b0[2] + xg[ib] * dbz)
            inner += wg[ib] / np.sqrt(ddx * ddx + ddy * ddy + ddz * ddz)
        acc += wg[ia] * inner
    return acc * la * lb


@njit(cache=True)
def neumann_pair_adaptive(a0, a1, b0, b1, xg, wg, max_depth):
    """Double line integral of 1/|x - x'| with recursive 2x subdivision of
    the longer sub-segment while the pair separation is below the longer
    sub-segment length. Explicit stack; max_depth bounds the chain toward
    a shared endpoint, where each level halves the leftover singular
    corner patch (depth 32 puts it below 1e-7 of the pair integral)."""
    cap = 4 * (max_depth + 2)
    stack = np.empty((cap, 13))
    stack[0, 0:3] = a0
    stack[0, 3:6] = a1
    stack[0, 6:9] = b0
    stack[0, 9:12] = b1
    stack[0, 12] = 0.0
    sp = 1
    total = 0.0
    while sp > 0:
        sp -= 1
        sa0 = stack[sp, 0:3].copy()
        sa1 = stack[sp, 3:6].copy()
        sb0 = stack[sp, 6:9].copy()
        sb1 = stack[sp, 9:12].copy()
        depth = int(stack[sp, 12])
        la = np.sqrt((sa1[0] - sa0[0]) ** 2 + (sa1[1] - sa0[1]) ** 2
                     + (sa1[2] - sa0[2]) ** 2)
        lb = np.sqrt((sb1[0] - sb0[0]) ** 2 + (sb1[1] - sb0[1]) ** 2
                     + (sb1[2] - sb0[2]) ** 2)
        lmax = la if la > lb else lb
        sep = seg_seg_distance(sa0, sa1, sb0, sb1)
        if depth >= max_depth or sep >= lmax or sp + 2 > cap:
            total += gauss_pair(sa0, sa1, sb0, sb1, xg, wg)
            continue
        if la >= lb:
            mid = 0.5 * (sa0 + sa1)
            stack[sp, 0:3] = sa0
            stack[sp, 3:6] = mid
            stack[sp, 6:9] = sb0
            stack[sp, 9:12] = sb1
            stack[sp, 12] = depth + 1
            sp += 1
            stack[sp, 0:3] = mid
            stack[sp, 3:6] = sa1
            stack[sp, 6:9] = sb0
            stack[sp, 9:12] = sb1
            stack[sp, 12] = depth + 1
            sp += 1
        else:
            mid = 0.5 * (sb0 + sb1)
            stack[sp, 0:3] = sa0
            stack[sp, 3:6] = sa1
            stack[sp, 6:9] = sb0
            stack[sp, 9:12] = mid
            stack[sp, 12] = depth + 1
            sp += 1
            stack[sp, 0:3] = sa0
            stack[sp, 3:6] = sa1
            stack[sp, 6:9] = mid
            stack[sp, 9:12] = sb1
            stack[sp, 12] = depth + 1
            sp += 1
    return total


@njit(cache=True)
def assemble_mutuals(starts, ends, xg, wg, max_depth, kappa, out):
    """Fill the strict lower triangle of out with kappa * (t_a . t_b) times
    the pair integral, mirrored to the upper triangle. Diagonal untouched."""
    nb = starts.shape[0]
    for i in range(nb):
        a0 = starts[i]
        a1 = ends[i]
        dax = a1[0] - a0[0]
        day = a1[1] - a0[1]
        daz = a1[2] - a0[2]
        la = np.sqrt(dax * dax + day * day + daz * daz)
        for j in range(i):
            b0 = starts[j]
            b1 = ends[j]
            dbx = b1[0] - b0[0]
            dby = b1[1] - b0[1]
            dbz = b1[2] - b0[2]
            lb = np.sqrt(dbx * dbx + dby * dby + dbz * dbz)
            dot = (dax * dbx + day * dby + daz * dbz) / (la * lb)
            if dot == 0.0:
                out[i, j] = 0.0
                out[j, i] = 0.0
                continue
            val = neumann_pair_adaptive(a0, a1, b0, b1, xg, wg, max_depth)
            m = kappa * dot * val
            out[i, j] = m
            out[j, i] = m
