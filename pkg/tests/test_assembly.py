"""Pair quadrature, branch matrices, current basis, incidence, fields.

The quadrature oracles are deliberately independent of the production
path: composite midpoint rules on fine uniform subdivisions.
"""
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from eddymodes.assembly import (
    MU0,
    assemble_branch_matrices,
    assemble_source_mutuals,
    biot_savart,
    build_current_basis,
    electrode_flux_matrix,
    electrode_incidence,
    neumann_mutual,
    self_inductance,
)
from eddymodes.errors import InvalidGeometry, ProbeTooClose, SingularPair
from eddymodes.linalg import cholesky
from eddymodes.network import SourceCoil, generate_tube_grid
from eddymodes.reduction import lift_electrode_currents


def midpoint_mutual(a0, a1, b0, b1, n=1000):
    """Composite-midpoint oracle for the pair integral, n cells per segment."""
    a0, a1, b0, b1 = map(np.asarray, (a0, a1, b0, b1))
    da, db = a1 - a0, b1 - b0
    la, lb = np.linalg.norm(da), np.linalg.norm(db)
    dot = float(da @ db / (la * lb))
    s = (np.arange(n) + 0.5) / n
    pa = a0 + s[:, None] * da
    pb = b0 + s[:, None] * db
    d = pa[:, None, :] - pb[None, :, :]
    r = np.sqrt((d * d).sum(axis=2))
    return MU0 / (4 * math.pi) * dot * la * lb * (1.0 / r).sum() / n**2


class TestNeumannMutual:
    def test_perpendicular_is_exactly_zero(self):
        a = ((0.0, 0.0, 0.0), (1.0, 0.0, 0.0))
        b = ((0.0, 0.5, 0.3), (0.0, 1.5, 0.3))
        assert neumann_mutual(a, b) == 0.0

    def test_parallel_pair_against_midpoint_oracle(self):
        a = ((0.0, 0.0, 0.0), (1.0, 0.0, 0.0))
        b = ((0.0, 0.1, 0.0), (1.0, 0.1, 0.0))
        m = neumann_mutual(a, b, quad_order=8)
        oracle = midpoint_mutual(a[0], a[1], b[0], b[1], n=1000)
        assert abs(m - oracle) <= 1e-6 * abs(oracle)

    def test_skewed_pair_against_midpoint_oracle(self):
        a = ((0.0, 0.0, 0.0), (0.7, 0.4, 0.0))
        b = ((0.1, 0.5, 0.4), (0.9, 0.8, 0.6))
        m = neumann_mutual(a, b, quad_order=8)
        oracle = midpoint_mutual(a[0], a[1], b[0], b[1], n=1200)
        assert abs(m - oracle) <= 1e-6 * abs(oracle)

    def test_argument_swap_is_bitwise_symmetric(self):
        a = ((0.0, 0.0, 0.0), (1.0, 0.2, 0.0))
        b = ((0.3, 0.5, 0.1), (0.9, 0.9, 0.4))
        assert neumann_mutual(a, b) == neumann_mutual(b, a)

    def test_overlapping_segments_rejected(self):
        a = ((0.0, 0.0, 0.0), (1.0, 0.0, 0.0))
        b = ((0.5, 0.0, 0.0), (1.5, 0.0, 0.0))
        with pytest.raises(SingularPair):
            neumann_mutual(a, b)

    def test_touching_collinear_segments_are_finite(self):
        a = ((0.0, 0.0, 0.0), (1.0, 0.0, 0.0))
        b = ((1.0, 0.0, 0.0), (2.0, 0.0, 0.0))
        m = neumann_mutual(a, b)
        # exact value for equal collinear touching unit filaments
        exact = MU0 / (4 * math.pi) * 2 * math.log(2.0)
        assert abs(m - exact) < 1e-4 * exact

    def test_quad_order_validated(self):
        a = ((0.0, 0.0, 0.0), (1.0, 0.0, 0.0))
        b = ((0.0, 1.0, 0.0), (1.0, 1.0, 0.0))
        from eddymodes.errors import ValidationError
        with pytest.raises(ValidationError):
            neumann_mutual(a, b, quad_order=1)


class TestSelfInductance:
    def test_against_regularized_kernel_oracle(self):
        l, r = 1.0, 1e-3
        # double integral of the offset kernel 1/sqrt(dx^2 + r^2),
        # composite midpoint on a 4000^2 grid
        n = 4000
        s = (np.arange(n) + 0.5) / n * l
        d = s[:, None] - s[None, :]
        val = MU0 / (4 * math.pi) * (1.0 / np.sqrt(d * d + r * r)).sum() * (l / n) ** 2
        mine = self_inductance(l, r)
        assert abs(mine - val) <= 0.05 * val

    def test_superlinear_in_length(self):
        assert self_inductance(2.0, 1e-3) > 2 * self_inductance(1.0, 1e-3)

    def test_decreasing_in_radius(self):
        assert self_inductance(1.0, 2e-3) < self_inductance(1.0, 1e-3)

    def test_radius_bounds(self):
        with pytest.raises(InvalidGeometry):
            self_inductance(1.0, 0.6)
        with pytest.raises(InvalidGeometry):
            self_inductance(0.0, 1e-3)


class TestBranchMatrices:
    def test_single_branch(self):
        from eddymodes.network import LoopNetwork, Electrode
        net = LoopNetwork(
            nodes=np.array([[0.0, 0, 0], [1.0, 0, 0]]),
            node_a=[0], node_b=[1], wire_radius=[1e-3],
            resistivity=[1.7e-8], cross_section=[1e-6],
            electrodes=(Electrode("a", (0,)), Electrode("b", (1,))))
        bm = assemble_branch_matrices(net)
        assert_allclose(bm.r_diag, [1.7e-8 * 1.0 / 1e-6])
        assert_allclose(bm.l_full, [[self_inductance(1.0, 1e-3)]])

    def test_far_perpendicular_branches_decouple(self):
        from eddymodes.network import LoopNetwork
        net = LoopNetwork(
            nodes=np.array([[0.0, 0, 0], [1.0, 0, 0],
                            [50.0, 0, 0], [50.0, 1.0, 0]]),
            node_a=[0, 2, 1], node_b=[1, 3, 2],
            wire_radius=[1e-3] * 3, resistivity=[1.7e-8] * 3,
            cross_section=[1e-6] * 3)
        bm = assemble_branch_matrices(net)
        assert bm.l_full[0, 1] == 0.0  # perpendicular: kernel dot vanishes

    def test_tube_4x8_inductance_is_spd(self, small_chain):
        _, bm, *_ = small_chain
        cholesky(bm.l_full)  # certificate; raises if not SPD

    def test_quadrature_convergence_on_reference_offdiagonals(self, small_chain):
        net, bm, *_ = small_chain
        bm16 = assemble_branch_matrices(net, quad_order=16)
        off8 = bm.l_full - np.diag(np.diag(bm.l_full))
        off16 = bm16.l_full - np.diag(np.diag(bm16.l_full))
        denom = np.abs(off16) + np.abs(off16).max() * 1e-30
        rel = np.abs(off8 - off16) / denom
        # compare only entries that are not orthogonal-pair exact zeros
        mask = np.abs(off16) > np.abs(off16).max() * 1e-12
        assert rel[mask].max() < 1e-6


class TestCurrentBasis:
    def test_square_loop_single_cycle(self):
        from eddymodes.network import LoopNetwork
        net = LoopNetwork(
            nodes=np.array([[0.0, 0, 0], [1.0, 0, 0], [1.0, 1, 0], [0.0, 1, 0]]),
            node_a=[0, 1, 2, 3], node_b=[1, 2, 3, 0],
            wire_radius=[1e-3] * 4, resistivity=[1.7e-8] * 4,
            cross_section=[1e-6] * 4)
        basis = build_current_basis(net)
        assert basis.n_columns == 1
        assert basis.n_cycles == 1
        # a single closed loop: all coefficients the same magnitude
        assert set(np.abs(basis.w[:, 0])) == {1}

    def test_single_path_between_electrodes(self):
        from eddymodes.network import LoopNetwork, Electrode
        net = LoopNetwork(
            nodes=np.array([[0.0, 0, 0], [1.0, 0, 0]]),
            node_a=[0], node_b=[1], wire_radius=[1e-3],
            resistivity=[1.7e-8], cross_section=[1e-6],
            electrodes=(Electrode("a", (0,)), Electrode("b", (1,))))
        basis = build_current_basis(net)
        assert basis.n_cycles == 0
        assert basis.n_paths == 1
        assert basis.n_columns == 1

    def test_tube_2x4_counts(self):
        net = generate_tube_grid(84e-3, 0.3, 3e-3, 2, 4, 1.09e-6)
        basis = build_current_basis(net)
        assert basis.n_cycles == 12 - 8 + 1
        assert basis.n_paths == 1

    def test_interior_conservation_exact(self, small_chain):
        net, _, basis, *_ = small_chain
        from eddymodes.assembly import node_flux
        flux = node_flux(net, basis)
        electrode_nodes = {v for el in net.electrodes for v in el.nodes}
        interior = [v for v in range(net.n_nodes) if v not in electrode_nodes]
        assert np.all(flux[interior] == 0)


class TestElectrodeIncidence:
    def test_cycle_columns_map_to_zero(self, small_chain):
        net, _, basis, e, _ = small_chain
        assert np.all(e.e[:, : basis.n_cycles] == 0)

    def test_single_path_unit_flux(self):
        from eddymodes.network import LoopNetwork, Electrode
        net = LoopNetwork(
            nodes=np.array([[0.0, 0, 0], [1.0, 0, 0]]),
            node_a=[0], node_b=[1], wire_radius=[1e-3],
            resistivity=[1.7e-8], cross_section=[1e-6],
            electrodes=(Electrode("a", (0,)), Electrode("b", (1,))))
        basis = build_current_basis(net)
        e = electrode_incidence(net, basis)
        assert e.e.tolist() == [[1]]

    @pytest.mark.parametrize("n_e", [2, 4])
    def test_full_flux_rows_sum_to_zero(self, n_e):
        if n_e == 2:
            spec = None
        else:
            spec = (("p0", ((0, 0),)), ("p1", ((0, 4),)),
                    ("p2", ((3, 2),)), ("p3", ((3, 6),)))
        net = generate_tube_grid(84e-3, 0.3, 3e-3, 4, 8, 1.09e-6,
                                 electrode_spec=spec)
        basis = build_current_basis(net)
        full = electrode_flux_matrix(net, basis)
        assert full.dtype.kind == "i"
        assert np.all(full.sum(axis=0) == 0)
        assert np.linalg.matrix_rank(full.astype(float)) == n_e - 1

    def test_kernel_annihilated_exactly(self, small_chain):
        net, _, basis, e, _ = small_chain
        assert np.all(e.e @ np.eye(basis.n_columns, basis.n_cycles,
                                   dtype=np.int64) == 0)


class TestSourceMutuals:
    def test_no_sources_empty(self, small_chain):
        net, _, basis, *_ = small_chain
        m0, md, names = assemble_source_mutuals(net, basis)
        assert m0.shape == (basis.n_columns, 0)
        assert md.shape == (basis.n_columns, 1)
        assert np.all(md == 0)
        assert names == ()

    def test_far_coil_couples_weakly(self):
        # closed square loop so the leading far-field term cancels
        near = SourceCoil("near", np.array([[0.1, 0.0, 0.1], [0.1, 0.05, 0.1],
                                            [0.1, 0.05, 0.2], [0.1, 0.0, 0.2],
                                            [0.1, 0.0, 0.1]]))
        far = SourceCoil("far", near.points + np.array([30.0, 0, 0]))
        net = generate_tube_grid(84e-3, 0.3, 3e-3, 2, 4, 1.09e-6,
                                 sources=(near, far))
        basis = build_current_basis(net)
        m0, _, names = assemble_source_mutuals(net, basis)
        assert names == ("near", "far")
        near_scale = np.abs(m0[:, 0]).max()
        far_scale = np.abs(m0[:, 1]).max()
        assert far_scale < 1e-3 * near_scale

    def test_reciprocity_role_swap(self):
        a = ((0.0, 0.0, 0.0), (0.3, 0.1, 0.0))
        b = ((0.1, 0.4, 0.2), (0.5, 0.5, 0.3))
        assert neumann_mutual(a, b) == neumann_mutual(b, a)


class TestBiotSavart:
    def test_zero_currents_zero_field(self, small_chain):
        net, *_ = small_chain
        b = biot_savart(net, np.zeros(net.n_branches),
                        np.array([[0.2, 0.0, 0.15]]))
        assert_allclose(b, 0.0)

    def test_negated_currents_negate_field(self, small_chain, rng):
        net, *_ = small_chain
        cur = rng.standard_normal(net.n_branches)
        probes = np.array([[0.2, 0.0, 0.15], [0.0, 0.3, -0.1]])
        assert_allclose(biot_savart(net, -cur, probes),
                        -biot_savart(net, cur, probes), rtol=0, atol=0)

    def test_square_loop_center_against_fine_oracle(self):
        from eddymodes.network import LoopNetwork
        net = LoopNetwork(
            nodes=np.array([[-0.5, -0.5, 0], [0.5, -0.5, 0],
                            [0.5, 0.5, 0], [-0.5, 0.5, 0]]),
            node_a=[0, 1, 2, 3], node_b=[1, 2, 3, 0],
            wire_radius=[1e-3] * 4, resistivity=[1.7e-8] * 4,
            cross_section=[1e-6] * 4)
        probe = np.array([[0.0, 0.0, 0.0]])
        b = biot_savart(net, np.ones(4), probe)

        # oracle: midpoint Biot-Savart sum over 1000 subsegments per side
        total = np.zeros(3)
        for k in range(4):
            p0 = net.nodes[net.node_a[k]]
            p1 = net.nodes[net.node_b[k]]
            seg = (p1 - p0) / 1000
            mids = p0 + (np.arange(1000)[:, None] + 0.5) * seg
            r = -mids
            cr = np.cross(np.broadcast_to(seg, r.shape), r)
            total += MU0 / (4 * math.pi) * \
                (cr / np.linalg.norm(r, axis=1)[:, None] ** 3).sum(axis=0)
        assert_allclose(b[0], total, rtol=1e-6)

    def test_probe_on_wire_rejected(self, small_chain):
        net, *_ = small_chain
        mid = 0.5 * (net.branch_starts[0] + net.branch_ends[0])
        with pytest.raises(ProbeTooClose):
            biot_savart(net, np.ones(net.n_branches), mid[None, :])

    def test_on_axis_outside_segment_is_zero(self):
        from eddymodes.network import LoopNetwork
        net = LoopNetwork(
            nodes=np.array([[0.0, 0, 0], [1.0, 0, 0], [1.0, 1.0, 0]]),
            node_a=[0, 1], node_b=[1, 2], wire_radius=[1e-3] * 2,
            resistivity=[1.7e-8] * 2, cross_section=[1e-6] * 2)
        # collinear with branch 0, beyond its far end
        b = biot_savart(net, np.array([1.0, 0.0]), np.array([[2.0, 0.0, 0.0]]))
        assert_allclose(b[0], 0.0, atol=1e-30)
