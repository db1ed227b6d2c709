"""Tube generator, model file round trips, and drive waveforms."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from eddymodes.errors import (
    InvalidGeometry,
    ParseError,
    ValidationError,
)
from eddymodes.ndt_defaults import DEFAULT_TONE_HZ
from eddymodes.network import (
    DefectSpec,
    DriveSignal,
    Electrode,
    LoopNetwork,
    Tone,
    default_phases,
    eval_drive,
    eval_drive_rate,
    generate_tube_grid,
    parse_model,
    serialize_model,
)

MINIMAL_MODEL = """
# two nodes, one branch, two single-node electrodes
[nodes]
0 0.0 0.0 0.0
1 1.0 0.0 0.0
[branches]
0 0 1 0.001 1.7e-8 1e-6
[electrodes]
left 0
right 1
"""


class TestTubeGrid:
    def test_2x4_counts(self):
        net = generate_tube_grid(84e-3, 0.3, 3e-3, 2, 4, 1.09e-6)
        assert net.n_nodes == 8
        assert net.n_branches == 12  # 2 rings of 4 plus 4 axial rungs
        assert net.n_electrodes == 2

    def test_remove_single_axial_branch(self):
        # window sized to catch exactly the axial branch at angle 0
        defect = DefectSpec(angle_min=-0.1, angle_max=0.1,
                            z_min=0.1, z_max=0.2, mode="remove-branches")
        net = generate_tube_grid(84e-3, 0.3, 3e-3, 2, 4, 1.09e-6, defect=defect)
        assert net.n_branches == 11

    @pytest.mark.parametrize("n_axial,n_circ", [(2, 4), (3, 5), (5, 8), (4, 12)])
    def test_cycle_count_euler_formula(self, n_axial, n_circ):
        net = generate_tube_grid(84e-3, 0.1 * (n_axial - 1), 3e-3,
                                 n_axial, n_circ, 1.09e-6)
        from eddymodes.assembly import build_current_basis
        basis = build_current_basis(net)
        assert basis.n_cycles == net.n_branches - net.n_nodes + 1

    def test_invalid_geometry(self):
        with pytest.raises(InvalidGeometry):
            generate_tube_grid(0.0, 0.3, 3e-3, 2, 4, 1.09e-6)
        with pytest.raises(InvalidGeometry):
            generate_tube_grid(84e-3, 0.3, 3e-3, 1, 4, 1.09e-6)

    def test_electrode_overlap_rejected(self):
        from eddymodes.errors import ElectrodeOverlap
        spec = (("a", ((0, 0),)), ("b", ((0, 0),)))
        with pytest.raises(ElectrodeOverlap):
            generate_tube_grid(84e-3, 0.3, 3e-3, 2, 4, 1.09e-6, electrode_spec=spec)

    def test_scale_resistivity_defect(self):
        defect = DefectSpec(angle_min=-0.1, angle_max=0.1, z_min=0.1, z_max=0.2,
                            mode="scale-resistivity", factor=10.0)
        base = generate_tube_grid(84e-3, 0.3, 3e-3, 2, 4, 1.09e-6)
        net = generate_tube_grid(84e-3, 0.3, 3e-3, 2, 4, 1.09e-6, defect=defect)
        assert net.n_branches == base.n_branches
        assert (net.resistivity > base.resistivity).sum() == 1

    def test_single_electrode_rejected(self):
        spec = (("only", ((0, 0),)),)
        with pytest.raises(ValidationError):
            generate_tube_grid(84e-3, 0.3, 3e-3, 2, 4, 1.09e-6, electrode_spec=spec)


class TestDefectConnectivity:
    """Removing a defect window must never leave a disconnected graph."""

    @settings(max_examples=25, deadline=None)
    @given(center=st.floats(-math.pi, math.pi),
           width=st.floats(0.05, 1.2),
           z0=st.floats(0.0, 0.25),
           dz=st.floats(0.005, 0.12))
    def test_generator_rejects_or_stays_connected(self, center, width, z0, dz):
        defect = DefectSpec(angle_min=center - width / 2,
                            angle_max=center + width / 2,
                            z_min=z0, z_max=z0 + dz, mode="remove-branches")
        try:
            net = generate_tube_grid(84e-3, 0.3, 3e-3, 6, 8, 1.09e-6, defect=defect)
        except ValidationError:
            return  # rejected: the window would have cut the graph apart
        assert net._connected()


class TestModelFile:
    def test_minimal_model(self):
        net = parse_model(MINIMAL_MODEL)
        assert net.n_nodes == 2
        assert net.n_branches == 1
        assert net.n_electrodes == 2

    def test_coincident_nodes_rejected(self):
        bad = MINIMAL_MODEL.replace("1 1.0 0.0 0.0", "1 0.0 0.0 0.0")
        with pytest.raises(ValidationError):
            parse_model(bad)

    def test_parse_error_carries_line_number(self):
        bad = "[nodes]\n0 0 0 0\nbogus line here\n"
        with pytest.raises(ParseError) as exc:
            parse_model(bad)
        assert exc.value.line == 3

    def test_round_trip_tube(self):
        net = generate_tube_grid(84e-3, 0.3, 3e-3, 3, 6, 1.09e-6)
        text = serialize_model(net)
        back = parse_model(text)
        assert back.n_nodes == net.n_nodes
        assert back.n_branches == net.n_branches
        assert_allclose(back.nodes, net.nodes, rtol=0)
        assert_allclose(back.branch_resistances(), net.branch_resistances(), rtol=0)
        assert tuple(e.name for e in back.electrodes) == \
            tuple(e.name for e in net.electrodes)
        # second round trip is bit-identical
        assert serialize_model(back) == text

    def test_sources_round_trip(self):
        from eddymodes.network import SourceCoil
        coil = SourceCoil("exciter", np.array([[0.2, 0, 0], [0.2, 0.1, 0],
                                               [0.2, 0.1, 0.1]]), port=None)
        net = generate_tube_grid(84e-3, 0.3, 3e-3, 2, 4, 1.09e-6,
                                 sources=(coil,))
        back = parse_model(serialize_model(net))
        assert back.sources[0].name == "exciter"
        assert back.sources[0].port is None
        assert_allclose(back.sources[0].points, coil.points, rtol=0)


class TestDrive:
    def test_single_tone_zero_at_origin(self):
        d = DriveSignal(tones=(Tone(1.0, 1.0, 0.0),))
        assert eval_drive(d, 0.0) == 0.0

    def test_thirty_tone_envelope(self):
        phases = default_phases(30)
        d = DriveSignal(tones=tuple(
            Tone(4.0, float(f), float(p)) for f, p in zip(DEFAULT_TONE_HZ, phases)))
        t = np.arange(30000) / 30000.0
        sig = eval_drive(d, t)
        assert 46.0 <= sig.max() <= 50.0
        assert -45.0 <= sig.min() <= -41.0

    def test_rate_matches_central_difference(self):
        phases = default_phases(5)
        d = DriveSignal(tones=tuple(
            Tone(2.0, float(f), float(p))
            for f, p in zip((1, 50, 100, 150, 250), phases)))
        h = 1e-7
        for t in (0.013, 0.4, 0.77):
            fd = (eval_drive(d, t + h) - eval_drive(d, t - h)) / (2 * h)
            exact = eval_drive_rate(d, t)
            assert abs(fd - exact) <= 1e-5 * max(abs(exact), 1.0)

    def test_periodicity_integer_hz(self):
        d = DriveSignal(tones=(Tone(1.0, 3.0, 0.4), Tone(0.5, 7.0, -0.2),
                               Tone(2.0, 10.0, 1.0)))
        # gcd(3, 7, 10) = 1 Hz, so the period is 1 s
        t = np.linspace(0.0, 0.9, 41)
        a = eval_drive(d, t)
        b = eval_drive(d, t + 1.0)
        assert_allclose(b, a, rtol=1e-9, atol=1e-9 * np.abs(a).max())

    def test_distinct_frequencies_required(self):
        with pytest.raises(ValidationError):
            DriveSignal(tones=(Tone(1.0, 5.0, 0.0), Tone(2.0, 5.0, 0.1)))


class TestDefaultPhases:
    def test_single_tone(self):
        assert_allclose(default_phases(1), [0.0])

    def test_two_tones(self):
        assert_allclose(default_phases(2), [0.0, -math.pi])

    def test_crest_factor_improves_on_zero_phases(self):
        t = np.arange(30000) / 30000.0
        phases = default_phases(30)
        scheduled = DriveSignal(tones=tuple(
            Tone(4.0, float(f), float(p)) for f, p in zip(DEFAULT_TONE_HZ, phases)))
        flat = DriveSignal(tones=tuple(
            Tone(4.0, float(f), 0.0) for f in DEFAULT_TONE_HZ))

        def crest(sig):
            y = eval_drive(sig, t)
            return np.abs(y).max() / np.sqrt((y ** 2).mean())

        assert crest(scheduled) < crest(flat)
