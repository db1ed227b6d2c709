"""End-to-end multi-frequency testing experiment on the tube grid.

A configuration run builds the (possibly defected) tube, assembles and
reduces it, drives the electrode pair with the multi-sine waveform,
records probe fields around the tube, and extracts one phasor per
(probe, tone). Signatures are complex differences of defected minus
background phasors, per probe and tone.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .assembly import assemble_branch_matrices, assemble_source_mutuals, \
    build_current_basis, electrode_incidence
from .errors import IndexMismatch, ValidationError
from .frequency import (
    PhasorSet,
    azimuthal_component,
    extract_phasors,
    fd_solve,
)
from .modal import ModalBasis, generalized_eig
from .ndt_defaults import DEFAULT_TONE_HZ
from .network import DefectSpec, DriveSignal, Tone, default_phases, generate_tube_grid
from .reduction import ReducedModel, project_model
from .transient import TransientConfig, run_transient


@dataclass(frozen=True)
class ProbeRing:
    """Arc of field probes around the tube at fixed height and standoff."""

    count: int = 25
    radius_offset: float = 3e-3
    height: float = 0.15
    span: float = math.pi
    center_angle: float = 0.0

    def __post_init__(self):
        if self.count < 1:
            raise ValidationError("probe count must be >= 1")

    def angles(self) -> np.ndarray:
        if self.count == 1:
            return np.array([self.center_angle])
        half = self.span / 2
        return self.center_angle + np.linspace(-half, half, self.count)

    def positions(self, tube_radius: float) -> np.ndarray:
        a = self.angles()
        r = tube_radius + self.radius_offset
        return np.stack([r * np.cos(a), r * np.sin(a),
                         np.full_like(a, self.height)], axis=1)

    @property
    def spacing(self) -> float:
        return self.span / (self.count - 1) if self.count > 1 else 0.0


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce one signature measurement."""

    radius: float = 84e-3
    length: float = 0.3
    wall_thickness: float = 3e-3
    n_axial: int = 12
    n_circ: int = 24
    resistivity: float = 1.09e-6
    defects: tuple[DefectSpec, ...] = ()
    tones: tuple[Tone, ...] = ()
    probe_ring: ProbeRing = field(default_factory=ProbeRing)
    sample_rate: float = 30000.0
    settle_time: float | None = None     # None: 5 * tau_1, snapped to steps
    analysis_window: float = 1.0
    method: str = "td2"
    theta: float = 1.0

    def __post_init__(self):
        if self.method not in ("td1", "td2", "fd"):
            raise ValidationError(f"unknown method {self.method!r}")
        if not self.tones:
            raise ValidationError("spec needs at least one tone")
        dt = 1.0 / self.sample_rate
        n_window = self.analysis_window * self.sample_rate
        if abs(n_window - round(n_window)) > 1e-9:
            raise ValidationError("analysis window must hold a whole number of samples")
        for t in self.tones:
            periods = self.analysis_window * t.frequency
            if abs(periods - round(periods)) > 1e-9:
                raise ValidationError(
                    f"analysis window is not an integer number of periods of "
                    f"{t.frequency} Hz")
            if t.frequency >= 0.5 / dt:
                raise ValidationError(f"tone {t.frequency} Hz at or above Nyquist")

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([t.frequency for t in self.tones])

    def drive(self) -> DriveSignal:
        return DriveSignal(tones=self.tones, ports=("drive",))


def default_defect(spec_like=None) -> DefectSpec:
    """Remove the mid-height axial branch column at angle zero."""
    n_axial = spec_like.n_axial if spec_like else 12
    n_circ = spec_like.n_circ if spec_like else 24
    length = spec_like.length if spec_like else 0.3
    dz = length / (n_axial - 1)
    half_gap = math.pi / n_circ / 2
    z_mid = length / 2
    return DefectSpec(angle_min=-half_gap, angle_max=half_gap,
                      z_min=z_mid - dz * 0.75, z_max=z_mid + dz * 0.75,
                      mode="remove-branches")


def default_experiment() -> ExperimentSpec:
    """The 30-tone equal-amplitude schedule at 30 kS/s on the desk tube."""
    phases = default_phases(len(DEFAULT_TONE_HZ))
    tones = tuple(Tone(4.0, float(f), float(p))
                  for f, p in zip(DEFAULT_TONE_HZ, phases))
    spec = ExperimentSpec(tones=tones)
    return replace(spec, defects=(default_defect(spec),))


def build_reduced(spec: ExperimentSpec, defect: DefectSpec | None):
    """Tube network plus its reduced model for one configuration."""
    net = generate_tube_grid(spec.radius, spec.length, spec.wall_thickness,
                             spec.n_axial, spec.n_circ, spec.resistivity,
                             electrode_spec=None, defect=defect)
    bm = assemble_branch_matrices(net)
    basis = build_current_basis(net)
    e = electrode_incidence(net, basis)
    m0, md, free_names = assemble_source_mutuals(net, basis)
    rm = project_model(bm, basis, e, m0=m0, md=md,
                       source_names=free_names,
                       port_names=tuple(el.name for el in net.electrodes[:-1]))
    return net, rm


def run_configuration(spec: ExperimentSpec, defect: DefectSpec | None = None,
                      reuse: tuple | None = None) -> PhasorSet:
    """One full pipeline: build, reduce, integrate (or solve per tone),
    extract the azimuthal-component phasor at every (probe, tone).

    ``reuse`` may carry a prebuilt (net, rm, modal_basis) triple for the
    same spec/defect to skip the heavy setup (used by the CLI to share the
    background assembly between plots and exports).
    """
    if reuse is not None:
        net, rm, basis = reuse
    else:
        net, rm = build_reduced(spec, defect)
        basis = generalized_eig(rm.l_i, rm.r_i) if (spec.method != "td1") else None

    probes = spec.probe_ring.positions(spec.radius)
    angles = spec.probe_ring.angles()

    if spec.method == "fd":
        ps = PhasorSet(probe_angles=tuple(float(a) for a in angles))
        for tone in spec.tones:
            omega = 2 * math.pi * tone.frequency
            i_d = np.full(rm.n_ports, tone.amplitude * np.exp(1j * tone.phase),
                          dtype=complex)
            _, fields = fd_solve(rm, net, omega, i_d, probes=probes)
            phi = azimuthal_component(fields[None, :, :], angles)[0]
            for p in range(len(angles)):
                ps[(p, float(tone.frequency))] = phi[p]
        return ps

    if spec.settle_time is None:
        if basis is None:
            basis = generalized_eig(rm.l_i, rm.r_i)
        tau1 = basis.tau[0] if basis.n_modes else 0.0
        settle = 5.0 * tau1
    else:
        settle = spec.settle_time
    settle_steps = int(math.ceil(settle / spec.dt - 1e-12)) if settle > 0 else 0
    t_settle = settle_steps * spec.dt
    t_end = t_settle + spec.analysis_window

    cfg = TransientConfig(theta=spec.theta, dt=spec.dt, t_end=t_end,
                          method=spec.method, probes=probes,
                          capture_state=False)
    result = run_transient(rm, net, spec.drive(), cfg,
                           modal=basis if spec.method == "td2" else None)
    phi = azimuthal_component(result.probe_fields, angles)
    return extract_phasors(result.times, phi, spec.frequencies, angles,
                           window=(t_settle, t_end))


@dataclass
class CrackSignature:
    """Complex phasor difference per (probe angle, tone)."""

    entries: dict[tuple[float, float], complex]
    probe_angles: tuple[float, ...]

    def __getitem__(self, key):
        return self.entries[key]

    @property
    def frequencies(self) -> tuple[float, ...]:
        return tuple(sorted({f for (_, f) in self.entries}))

    def magnitude_by_angle(self, f: float) -> np.ndarray:
        return np.array([abs(self.entries[(a, f)]) for a in self.probe_angles])

    def normalized(self) -> "CrackSignature":
        """Per tone, divide by the maximum magnitude over probes."""
        out = {}
        for f in self.frequencies:
            mags = self.magnitude_by_angle(f)
            peak = mags.max()
            for a in self.probe_angles:
                out[(a, f)] = self.entries[(a, f)] / peak if peak > 0 else 0j
        return CrackSignature(entries=out, probe_angles=self.probe_angles)


def crack_signature(defect_phasors: PhasorSet,
                    background_phasors: PhasorSet) -> CrackSignature:
    """Elementwise complex difference defect minus background."""
    if set(defect_phasors.entries) != set(background_phasors.entries):
        raise IndexMismatch("phasor sets do not share the same (probe, tone) keys")
    if defect_phasors.probe_angles != background_phasors.probe_angles:
        raise IndexMismatch("phasor sets do not share probe angles")
    angles = defect_phasors.probe_angles
    entries = {}
    for (p, f), z in defect_phasors.entries.items():
        entries[(angles[p], f)] = z - background_phasors.entries[(p, f)]
    return CrackSignature(entries=entries, probe_angles=angles)


# --- spec (de)serialization ---------------------------------------------------

def spec_to_json(spec: ExperimentSpec) -> str:
    d = asdict(spec)
    d["tones"] = [[t.amplitude, t.frequency, t.phase] for t in spec.tones]
    d["defects"] = [asdict(df) for df in spec.defects]
    d["probe_ring"] = asdict(spec.probe_ring)
    return json.dumps(d, indent=2)


def spec_from_json(text: str) -> ExperimentSpec:
    d = json.loads(text)
    d["tones"] = tuple(Tone(*t) for t in d.get("tones", []))
    d["defects"] = tuple(DefectSpec(**df) for df in d.get("defects", []))
    d["probe_ring"] = ProbeRing(**d.get("probe_ring", {}))
    return ExperimentSpec(**d)


# --- CSV export -----------------------------------------------------------------

def write_signature_csv(path, sig: CrackSignature,
                        header_lines: tuple[str, ...] = ()):
    """Signature export: probe_angle_rad, f_hz, dB_re, dB_im, dB_mag."""
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("probe_angle_rad,f_hz,dB_re,dB_im,dB_mag\n")
        for f in sig.frequencies:
            for a in sig.probe_angles:
                z = sig.entries[(a, f)]
                fh.write(f"{a!r},{f!r},{z.real!r},{z.imag!r},{abs(z)!r}\n")


def write_locus_csv(path, sig: CrackSignature,
                    header_lines: tuple[str, ...] = ()):
    """Normalized complex-plane locus export per tone."""
    norm = sig.normalized()
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("# normalization: per tone by max |dB| over probes\n")
        fh.write("probe_angle_rad,f_hz,re_norm,im_norm\n")
        for f in norm.frequencies:
            for a in norm.probe_angles:
                z = norm.entries[(a, f)]
                fh.write(f"{a!r},{f!r},{z.real!r},{z.imag!r}\n")
