"""Per-tone frequency-domain solution and DFT phasor extraction.

Phasor convention throughout: x(t) = Im{X e^(j w t)}, so a pure
sin(w t) maps to X = 1 at angle 0. The complex impedance solve
(R_i + j w L_i) I = E is carried out through a real symmetric 2n
embedding [[R, wL], [wL, -R]] acting on (Re I, -Im I) with right-hand
side (Re E, Im E), factored by pivoted LU (the embedding is indefinite).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .assembly import field_transfer
from .errors import (
    DimensionMismatch,
    IndexMismatch,
    NonintegerPeriods,
    NyquistViolation,
    ValidationError,
)
from .network import LoopNetwork
from .reduction import ReducedModel

#: Marker string recorded with every phasor set.
IM_CONVENTION = "x(t) = Im{X exp(jwt)}"


@dataclass
class PhasorSet:
    """Complex value per (probe_id, tone frequency). Fields are in tesla,
    currents in amperes; ``convention`` records the time-dependence choice."""

    entries: dict[tuple[int, float], complex] = field(default_factory=dict)
    probe_angles: tuple[float, ...] = ()
    convention: str = IM_CONVENTION

    def __setitem__(self, key, value):
        self.entries[key] = complex(value)

    def __getitem__(self, key):
        return self.entries[key]

    @property
    def frequencies(self) -> tuple[float, ...]:
        return tuple(sorted({f for (_, f) in self.entries}))

    @property
    def probe_ids(self) -> tuple[int, ...]:
        return tuple(sorted({p for (p, _) in self.entries}))


def solve_tone(rm: ReducedModel, omega: float, i_d_phasor: np.ndarray,
               i0_phasor: np.ndarray) -> np.ndarray:
    """Internal current phasors for one tone.

    Solves (R_i + j w L_i) I = -(R_D + j w L_D) i_D - j w M0 i0 through
    the real embedding described in the module docstring. Relative
    residual of the complex system is driven below 1e-10 by construction
    (double-precision pivoted LU on a well-conditioned embedding).
    """
    if omega < 0:
        raise ValidationError("omega must be >= 0")
    n = rm.n_internal
    i_d_phasor = np.asarray(i_d_phasor, dtype=complex)
    i0_phasor = np.asarray(i0_phasor, dtype=complex)
    if i_d_phasor.shape != (rm.n_ports,):
        raise DimensionMismatch(f"expected {rm.n_ports} port phasors")
    if i0_phasor.shape != (rm.n_sources,):
        raise DimensionMismatch(f"expected {rm.n_sources} source phasors")
    if n == 0:
        return np.zeros(0, dtype=complex)
    e = np.zeros(n, dtype=complex)
    if rm.n_ports:
        e -= (rm.r_d + 1j * omega * rm.l_d) @ i_d_phasor
    if rm.n_sources:
        e -= 1j * omega * (rm.m0 @ i0_phasor)
    r = rm.r_i.full
    l = rm.l_i.full
    big = np.zeros((2 * n, 2 * n))
    big[:n, :n] = r
    big[:n, n:] = omega * l
    big[n:, :n] = omega * l
    big[n:, n:] = -r
    rhs = np.concatenate([e.real, e.imag])
    x = linalg.lu_solve(linalg.lu_factor(big), rhs)
    return x[:n] - 1j * x[n:]


def fd_solve(rm: ReducedModel, net: LoopNetwork | None, omega: float,
             i_d_phasor: np.ndarray, i0_phasor: np.ndarray | None = None,
             probes: np.ndarray | None = None):
    """One-tone solve returning (internal current phasors, probe field
    phasors or None). Probe fields superpose Biot-Savart transfers of the
    lifted total phasor currents."""
    if i0_phasor is None:
        i0_phasor = np.zeros(rm.n_sources, dtype=complex)
    currents = solve_tone(rm, omega, i_d_phasor, i0_phasor)
    fields = None
    if probes is not None:
        if net is None or rm.basis is None:
            raise ValidationError("probe fields require the network geometry")
        transfer = field_transfer(net, probes)
        w = rm.basis.w.astype(float)
        coords = rm.k @ currents + rm.lift @ np.asarray(i_d_phasor, dtype=complex)
        branch = w @ coords
        fields = transfer @ branch.real + 1j * (transfer @ branch.imag)
    return currents, fields


def dft_phasor(samples: np.ndarray, dt: float, f: float,
               t0: float = 0.0) -> complex:
    """Single-tone phasor of a uniformly sampled record in the
    Im-convention.

    samples[m] are values at t = t0 + m dt; the record must span an
    integer number of periods of f, and f must be below Nyquist. The raw
    projection (2/N) sum x e^(-jwt) returns -j for a pure sine, so a 90
    degree rotation (multiply by j) lands sin(w t) exactly on 1 + 0j.
    """
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    if n < 2:
        raise ValidationError("need at least 2 samples")
    if f >= 0.5 / dt:
        raise NyquistViolation(f"{f} Hz is not below Nyquist {0.5 / dt} Hz")
    periods = n * dt * f
    if abs(periods - round(periods)) > 1e-9:
        raise NonintegerPeriods(
            f"window of {n} samples spans {periods} periods of {f} Hz")
    t = t0 + dt * np.arange(n)
    w = 2 * math.pi * f
    raw = (2.0 / n) * np.sum(samples * np.exp(-1j * w * t))
    return 1j * raw


def extract_phasors(times: np.ndarray, fields_phi: np.ndarray,
                    frequencies, probe_angles,
                    window: tuple[float, float] | None = None) -> PhasorSet:
    """Tone phasors of per-probe azimuthal field records.

    times must be uniform; fields_phi is (n_times, n_probes). The window
    (start, end) selects samples with start <= t < end; sample times are
    absolute, keeping extracted phases referenced to the drive's t = 0.
    """
    times = np.asarray(times, dtype=float)
    fields_phi = np.asarray(fields_phi, dtype=float)
    dt = times[1] - times[0]
    if window is None:
        sel = slice(None)
    else:
        start, end = window
        # select by index so the window always holds exactly
        # round((end - start)/dt) samples regardless of rounding in times
        first = int(np.searchsorted(times, start - 0.5 * dt))
        count = int(round((end - start) / dt))
        if first + count > times.shape[0]:
            raise ValidationError("analysis window extends past the record")
        sel = slice(first, first + count)
    tsel = times[sel]
    fsel = fields_phi[sel]
    ps = PhasorSet(probe_angles=tuple(float(a) for a in probe_angles))
    for f in frequencies:
        for p in range(fsel.shape[1]):
            ps[(p, float(f))] = dft_phasor(fsel[:, p], dt, float(f), t0=float(tsel[0]))
    return ps


def azimuthal_component(fields: np.ndarray, probe_angles: np.ndarray) -> np.ndarray:
    """Project (n_times, n_probes, 3) field vectors on the azimuthal unit
    vector of each probe."""
    a = np.asarray(probe_angles, dtype=float)
    phi_hat = np.stack([-np.sin(a), np.cos(a), np.zeros_like(a)], axis=1)
    return np.einsum("tpc,pc->tp", fields, phi_hat)


def write_phasor_csv(path, ps: PhasorSet, header_lines: tuple[str, ...] = ()):
    """Phasor export: probe_id, f_hz, re, im, mag, phase_deg."""
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(f"# convention: {ps.convention}\n")
        fh.write("probe_id,f_hz,re,im,mag,phase_deg\n")
        for (p, f) in sorted(ps.entries):
            z = ps.entries[(p, f)]
            fh.write(f"{p},{f!r},{z.real!r},{z.imag!r},{abs(z)!r},"
                     f"{math.degrees(math.atan2(z.imag, z.real))!r}\n")
