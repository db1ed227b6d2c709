"""Shared fixtures. The reference tube chain is expensive (assembly plus
a 265-mode eigensolve), so it is built once per session."""
from __future__ import annotations

import numpy as np
import pytest

from eddymodes.assembly import (
    assemble_branch_matrices,
    build_current_basis,
    electrode_incidence,
)
from eddymodes.modal import generalized_eig
from eddymodes.ndt import ExperimentSpec, default_experiment
from eddymodes.network import generate_tube_grid
from eddymodes.reduction import project_model


def build_chain(n_axial, n_circ, resistivity=1.09e-6, radius=84e-3,
                length=0.3, wall=3e-3, defect=None, electrode_spec=None):
    """Network through reduced model, the standard pipeline."""
    net = generate_tube_grid(radius, length, wall, n_axial, n_circ,
                             resistivity, electrode_spec=electrode_spec,
                             defect=defect)
    bm = assemble_branch_matrices(net)
    basis = build_current_basis(net)
    e = electrode_incidence(net, basis)
    port_names = tuple(el.name for el in net.electrodes[:-1])
    rm = project_model(bm, basis, e, port_names=port_names)
    return net, bm, basis, e, rm


@pytest.fixture(scope="session")
def small_chain():
    """4 x 8 tube: 56 branches, 25 internal unknowns."""
    return build_chain(4, 8)


@pytest.fixture(scope="session")
def small_modal(small_chain):
    *_, rm = small_chain
    return generalized_eig(rm.l_i, rm.r_i)


@pytest.fixture(scope="session")
def reference_chain():
    """The desk-scale reference tube: 12 x 24 rings, 265 internal unknowns."""
    return build_chain(12, 24)


@pytest.fixture(scope="session")
def reference_modal(reference_chain):
    *_, rm = reference_chain
    return generalized_eig(rm.l_i, rm.r_i)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240807)


def eigen_groups(tau, rtol=1e-8):
    """Index ranges of (numerically) equal time constants. The tube's
    discrete rotational symmetry makes many modes exactly degenerate, so
    eigenvectors are only comparable per invariant subspace."""
    groups, start = [], 0
    for i in range(1, len(tau) + 1):
        if i == len(tau) or abs(tau[i] - tau[start]) > rtol * tau[start]:
            groups.append((start, i))
            start = i
    return groups


def modal_directions_match(mb1, mb2, tol=1e-12):
    """True when the two bases span identical invariant subspaces: equal
    projectors per degenerate group, sign-fixed equal columns for simple
    modes (column scale is normalization-dependent, so compare unit
    columns)."""
    for a, b in eigen_groups(mb1.tau):
        if b - a == 1:
            v1 = mb1.v[:, a] / np.linalg.norm(mb1.v[:, a])
            v2 = mb2.v[:, a] / np.linalg.norm(mb2.v[:, a])
            if v1 @ v2 < 0:
                v2 = -v2
            if np.abs(v1 - v2).max() > tol:
                return False
        else:
            q1, _ = np.linalg.qr(mb1.v[:, a:b])
            q2, _ = np.linalg.qr(mb2.v[:, a:b])
            if np.abs(q1 @ q1.T - q2 @ q2.T).max() > tol:
                return False
    return True
