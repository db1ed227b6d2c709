"""Branch-level matrix assembly and field evaluation.

Resistances are plain eta*l/A per branch. Inductances come from the
free-space vector-potential kernel between straight filaments: mutual
terms are double line integrals of (t_a . t_b)/|x - x'| evaluated with
Gauss-Legendre quadrature plus recursive subdivision for close pairs,
and diagonal terms use the thin-wire closed form. The module also builds
the loop/path current basis on the branch graph, the electrode incidence
matrix, source-coil mutual columns, and Biot-Savart probe fields.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels, linalg
from .errors import (
    DimensionMismatch,
    Disconnected,
    InvalidGeometry,
    ProbeTooClose,
    SingularPair,
    ValidationError,
)
from .network import LoopNetwork

#: Free-space permeability in H/m.
MU0 = 4e-7 * math.pi

#: Default Gauss-Legendre order per segment pair.
DEFAULT_QUAD_ORDER = 8
#: Depth cap for recursive pair subdivision (close/touching segments).
MAX_SUBDIVISION_DEPTH = 32


@functools.lru_cache(maxsize=16)
def _gauss_nodes(order: int) -> tuple[np.ndarray, np.ndarray]:
    if order < 2:
        raise ValidationError("quad_order must be >= 2")
    x, w = np.polynomial.legendre.leggauss(order)
    return (x + 1.0) / 2.0, w / 2.0


def _as_segment(seg) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(seg[0], dtype=float)
    b = np.asarray(seg[1], dtype=float)
    if a.shape != (3,) or b.shape != (3,):
        raise DimensionMismatch("a segment is a pair of 3-D points")
    if np.linalg.norm(b - a) == 0.0:
        raise InvalidGeometry("zero-length segment")
    return a, b


def _collinear_overlap(a0, a1, b0, b1) -> bool:
    da = a1 - a0
    db = b1 - b0
    la = np.linalg.norm(da)
    lb = np.linalg.norm(db)
    scale = max(la, lb)
    if np.linalg.norm(np.cross(da, db)) > 1e-12 * la * lb:
        return False
    if np.linalg.norm(np.cross(b0 - a0, da)) > 1e-12 * la * scale:
        return False
    # project b endpoints on the a axis and test interval overlap
    t0 = float(np.dot(b0 - a0, da) / (la * la))
    t1 = float(np.dot(b1 - a0, da) / (la * la))
    lo, hi = min(t0, t1), max(t0, t1)
    return hi > 1e-12 and lo < 1.0 - 1e-12


def neumann_mutual(segment_a, segment_b, quad_order: int = DEFAULT_QUAD_ORDER) -> float:
    """Mutual inductance in henry between two straight filament segments,
    mu0/4pi times the double line integral of (t_a . t_b)/|x - x'|.

    Arguments are (start, end) point pairs. Symmetric in its arguments by
    construction: the pair is put in a canonical order before evaluation,
    so swapping them returns the identical value bit for bit. Raises
    SingularPair for collinear overlapping segments, which have no finite
    mutual; route those to self_inductance or subdivide the geometry.
    """
    a0, a1 = _as_segment(segment_a)
    b0, b1 = _as_segment(segment_b)
    if _collinear_overlap(a0, a1, b0, b1):
        raise SingularPair("segments overlap; mutual integral diverges")
    da = a1 - a0
    db = b1 - b0
    dot = float(np.dot(da, db) / (np.linalg.norm(da) * np.linalg.norm(db)))
    if dot == 0.0:
        return 0.0
    # canonical order: lexicographically smaller endpoint list first
    ka = (tuple(a0), tuple(a1))
    kb = (tuple(b0), tuple(b1))
    if kb < ka:
        a0, a1, b0, b1 = b0, b1, a0, a1
    xg, wg = _gauss_nodes(quad_order)
    val = _kernels.neumann_pair_adaptive(a0, a1, b0, b1, xg, wg, MAX_SUBDIVISION_DEPTH)
    return MU0 / (4 * math.pi) * dot * val


def self_inductance(length: float, wire_radius: float) -> float:
    """Thin-wire self inductance (mu0 l / 2 pi) (ln(2 l / r) - 1) in henry."""
    if length <= 0:
        raise InvalidGeometry("length must be positive")
    if not (0 < wire_radius < length / 2):
        raise InvalidGeometry("wire radius must satisfy 0 < r < l/2")
    return MU0 * length / (2 * math.pi) * (math.log(2 * length / wire_radius) - 1.0)


@dataclass(frozen=True)
class BranchMatrices:
    """Per-branch resistance (diagonal, ohm) and full inductance (henry)."""

    r_diag: np.ndarray
    l_full: np.ndarray

    def __post_init__(self):
        if np.any(self.r_diag <= 0):
            raise ValidationError("branch resistances must be positive")

    @property
    def n(self) -> int:
        return self.r_diag.shape[0]


def assemble_branch_matrices(net: LoopNetwork,
                             quad_order: int = DEFAULT_QUAD_ORDER) -> BranchMatrices:
    """Build R (diagonal) and L (dense symmetric) over the branches.

    L off-diagonals use the pair quadrature, diagonals the thin-wire
    formula. Positive definiteness of L is certified by Cholesky; failure
    means the filament idealization broke down for this geometry.
    """
    starts = np.ascontiguousarray(net.branch_starts)
    ends = np.ascontiguousarray(net.branch_ends)
    nb = net.n_branches
    xg, wg = _gauss_nodes(quad_order)
    l_full = np.zeros((nb, nb))
    kappa = MU0 / (4 * math.pi)
    _kernels.assemble_mutuals(starts, ends, xg, wg, MAX_SUBDIVISION_DEPTH, kappa, l_full)
    lengths = net.branch_lengths
    for i in range(nb):
        l_full[i, i] = self_inductance(lengths[i], net.wire_radius[i])
    linalg.cholesky(l_full, what="branch inductance matrix")
    return BranchMatrices(r_diag=net.branch_resistances(), l_full=l_full)


# --- current basis --------------------------------------------------------------

@dataclass(frozen=True)
class CurrentBasis:
    """Branch-current basis: fundamental cycles then electrode paths.

    w has one row per branch, one column per basis vector, entries in
    {-1, 0, +1}. Every column conserves current at every non-electrode
    node exactly (integer arithmetic).
    """

    w: np.ndarray
    n_cycles: int
    n_paths: int

    @property
    def n_columns(self) -> int:
        return self.w.shape[1]

    @property
    def cycle_columns(self) -> np.ndarray:
        return self.w[:, : self.n_cycles]

    @property
    def path_columns(self) -> np.ndarray:
        return self.w[:, self.n_cycles:]


def _spanning_tree(net: LoopNetwork, root: int):
    """Breadth-first tree; neighbors visited in branch-id order."""
    n = net.n_nodes
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for b in range(net.n_branches):
        a, c = int(net.node_a[b]), int(net.node_b[b])
        adj[a].append((b, c))
        adj[c].append((b, a))
    for lst in adj:
        lst.sort()
    parent_edge = np.full(n, -1, dtype=np.int64)
    parent_node = np.full(n, -1, dtype=np.int64)
    depth = np.full(n, -1, dtype=np.int64)
    order = [root]
    depth[root] = 0
    head = 0
    while head < len(order):
        v = order[head]
        head += 1
        for b, w in adj[v]:
            if depth[w] < 0:
                depth[w] = depth[v] + 1
                parent_edge[w] = b
                parent_node[w] = v
                order.append(w)
    if np.any(depth < 0):
        raise Disconnected("branch graph is not connected")
    return parent_edge, parent_node, depth


def _tree_path_column(net, parent_edge, parent_node, depth, start: int, end: int,
                      col: np.ndarray):
    """Add the signed tree path start -> end into col (branch coefficients)."""
    u, v = start, end
    up_u: list[int] = []
    up_v: list[int] = []
    while depth[u] > depth[v]:
        up_u.append(u)
        u = parent_node[u]
    while depth[v] > depth[u]:
        up_v.append(v)
        v = parent_node[v]
    while u != v:
        up_u.append(u)
        up_v.append(v)
        u = parent_node[u]
        v = parent_node[v]
    for w in up_u:  # walking up from start: current flows w -> parent(w)
        b = parent_edge[w]
        col[b] += 1 if int(net.node_a[b]) == w else -1
    for w in up_v:  # walking down toward end: current flows parent(w) -> w
        b = parent_edge[w]
        col[b] += 1 if int(net.node_b[b]) == w else -1


def build_current_basis(net: LoopNetwork) -> CurrentBasis:
    """Spanning-tree basis: one fundamental cycle per co-tree branch and
    one tree path from each non-reference electrode to the reference one.

    The tree grows breadth-first from the reference electrode's injection
    node (the last-listed electrode), or node 0 when there are no
    electrodes, with deterministic branch ordering by id. Cycle count is
    branches - nodes + 1; path count is n_electrodes - 1.
    """
    n_e = net.n_electrodes
    root = net.electrodes[-1].reference_node if n_e else 0
    parent_edge, parent_node, depth = _spanning_tree(net, root)
    tree_branches = set(int(b) for b in parent_edge if b >= 0)
    n_cycles = net.n_branches - net.n_nodes + 1
    n_paths = max(n_e - 1, 0)
    w = np.zeros((net.n_branches, n_cycles + n_paths), dtype=np.int64)
    col = 0
    for b in range(net.n_branches):
        if b in tree_branches:
            continue
        w[b, col] = 1  # co-tree branch traversed tail -> head
        _tree_path_column(net, parent_edge, parent_node, depth,
                          int(net.node_b[b]), int(net.node_a[b]), w[:, col])
        col += 1
    assert col == n_cycles
    for el in (net.electrodes[:-1] if n_e else ()):
        _tree_path_column(net, parent_edge, parent_node, depth,
                          el.reference_node, root, w[:, col])
        col += 1
    return CurrentBasis(w=w, n_cycles=n_cycles, n_paths=n_paths)


def node_flux(net: LoopNetwork, basis: CurrentBasis) -> np.ndarray:
    """Net current injected at every node by each basis column, exact
    integers: positive where a column pushes current out of the node into
    the branches."""
    flux = np.zeros((net.n_nodes, basis.n_columns), dtype=np.int64)
    np.add.at(flux, net.node_a, basis.w)
    np.subtract.at(flux, net.node_b, basis.w)
    return flux


@dataclass(frozen=True)
class IncidenceE:
    """Reduced electrode incidence: rows are the non-reference electrodes,
    columns the basis vectors; entry (k, j) is the net current into
    electrode k carried by column j. Cycle columns map to zero."""

    e: np.ndarray

    @property
    def n_ports(self) -> int:
        return self.e.shape[0]


def electrode_flux_matrix(net: LoopNetwork, basis: CurrentBasis) -> np.ndarray:
    """Full (n_electrodes x n_columns) integer flux matrix, including the
    reference electrode's dependent row. Its rows sum to the zero row."""
    flux = node_flux(net, basis)
    rows = np.zeros((net.n_electrodes, basis.n_columns), dtype=np.int64)
    for k, el in enumerate(net.electrodes):
        rows[k] = flux[list(el.nodes)].sum(axis=0)
    return rows


def electrode_incidence(net: LoopNetwork, basis: CurrentBasis) -> IncidenceE:
    """Reduced incidence matrix: the full flux matrix with the
    reference (last-listed) electrode's row dropped."""
    if net.n_electrodes == 0:
        return IncidenceE(e=np.zeros((0, basis.n_columns), dtype=np.int64))
    full = electrode_flux_matrix(net, basis)
    return IncidenceE(e=full[:-1])


# --- sources ---------------------------------------------------------------------

def _coil_mutual_column(net: LoopNetwork, basis: CurrentBasis, coil,
                        quad_order: int) -> np.ndarray:
    starts, ends = coil.segments
    nb = net.n_branches
    bs, be = net.branch_starts, net.branch_ends
    mut = np.zeros(nb)
    for s0, s1 in zip(starts, ends):
        for b in range(nb):
            mut[b] += neumann_mutual((s0, s1), (bs[b], be[b]), quad_order)
    return basis.w.T.astype(float) @ mut


def assemble_source_mutuals(net: LoopNetwork, basis: CurrentBasis,
                            quad_order: int = DEFAULT_QUAD_ORDER):
    """Mutual-inductance columns between source coils and basis vectors.

    Returns (m0, md, free_names): m0 has one column per free coil
    (independent source currents), md one column per electrode port fed by
    a bound coil (ordered like the non-reference electrodes). Raises
    SingularPair if a coil segment coincides with a network branch.
    """
    n_ports = max(net.n_electrodes - 1, 0)
    n_x = basis.n_columns
    free = [c for c in net.sources if c.port is None]
    bound = [c for c in net.sources if c.port is not None]
    m0 = np.zeros((n_x, len(free)))
    md = np.zeros((n_x, n_ports))
    port_names = [el.name for el in net.electrodes[:-1]]
    for j, coil in enumerate(free):
        m0[:, j] = _coil_mutual_column(net, basis, coil, quad_order)
    for coil in bound:
        if coil.port not in port_names:
            raise ValidationError(
                f"coil {coil.name!r} bound to {coil.port!r}, which is not a "
                "non-reference electrode")
        md[:, port_names.index(coil.port)] += _coil_mutual_column(net, basis, coil, quad_order)
    return m0, md, tuple(c.name for c in free)


# --- magnetic field ----------------------------------------------------------------

def field_transfer(net: LoopNetwork, probes: np.ndarray) -> np.ndarray:
    """(n_probes, 3, n_branches) map from branch currents to B at probes.

    Exact finite straight-segment Biot-Savart. Raises ProbeTooClose when a
    probe sits within a branch's wire radius of its axis segment.
    """
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    if probes.shape[1] != 3:
        raise DimensionMismatch("probes must be (n, 3) positions")
    a = net.branch_starts
    b = net.branch_ends
    u = b - a
    lu = np.linalg.norm(u, axis=1)
    that = u / lu[:, None]

    r1 = probes[:, None, :] - a[None, :, :]          # (p, nb, 3)
    r2 = probes[:, None, :] - b[None, :, :]
    n1 = np.linalg.norm(r1, axis=2)
    n2 = np.linalg.norm(r2, axis=2)
    cross = np.cross(np.broadcast_to(that, r1.shape), r1)
    d2 = (cross * cross).sum(axis=2)                  # squared distance to axis line
    t1 = (that[None] * r1).sum(axis=2)
    t2 = (that[None] * r2).sum(axis=2)

    # distance to the finite segment (not the infinite line)
    dist_seg = np.where(t1 < 0, n1, np.where(t2 > 0, n2, np.sqrt(np.maximum(d2, 0.0))))
    too_close = dist_seg <= net.wire_radius[None, :]
    if np.any(too_close):
        p, j = np.argwhere(too_close)[0]
        raise ProbeTooClose(f"probe {p} lies on branch {j} (within the wire radius)")

    with np.errstate(divide="ignore", invalid="ignore"):
        coef = MU0 / (4 * math.pi) * (t1 / n1 - t2 / n2) / d2
    # on-axis but outside the segment: field is exactly zero
    coef = np.where(d2 < (1e-14 * lu[None, :] ** 2), 0.0, coef)
    t = coef[:, :, None] * cross                      # (p, nb, 3)
    return np.ascontiguousarray(np.transpose(t, (0, 2, 1)))


def biot_savart(net: LoopNetwork, branch_currents: np.ndarray,
                probes: np.ndarray) -> np.ndarray:
    """B vectors in tesla at probe positions for the given branch currents."""
    currents = np.asarray(branch_currents, dtype=float)
    if currents.shape != (net.n_branches,):
        raise DimensionMismatch(
            f"expected {net.n_branches} branch currents, got {currents.shape}")
    return field_transfer(net, probes) @ currents
